use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::distribution::check_simplex;

pub const DEFAULT_QUADRATURE_NODES: usize = 256;

fn default_nodes() -> usize {
    DEFAULT_QUADRATURE_NODES
}

/// Distribution of the inelastic net demand `z`, drawn IID across days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NetDemandModel {
    Uniform {
        lo: f64,
        hi: f64,
        /// Composite-midpoint nodes used when integrating over `z`.
        #[serde(rename = "quadratureNodes", default = "default_nodes")]
        quadrature_nodes: usize,
    },
    Discrete {
        values: Vec<f64>,
        probs: Vec<f64>,
    },
}

impl NetDemandModel {
    pub fn uniform(lo: f64, hi: f64) -> Self {
        NetDemandModel::Uniform {
            lo,
            hi,
            quadrature_nodes: DEFAULT_QUADRATURE_NODES,
        }
    }

    pub fn constant(z: f64) -> Self {
        NetDemandModel::Discrete {
            values: vec![z],
            probs: vec![1.0],
        }
    }

    pub fn discrete(values: Vec<f64>, probs: Vec<f64>) -> Self {
        NetDemandModel::Discrete { values, probs }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            NetDemandModel::Uniform {
                lo,
                hi,
                quadrature_nodes,
            } => {
                if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
                    return Err(format!("uniform support requires lo < hi (got [{lo}, {hi}])"));
                }
                if *quadrature_nodes == 0 {
                    return Err("quadratureNodes must be positive".into());
                }
                Ok(())
            }
            NetDemandModel::Discrete { values, probs } => {
                if values.len() != probs.len() {
                    return Err(format!("{} values but {} probabilities", values.len(), probs.len()));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err("values must be finite".into());
                }
                check_simplex(probs)
            }
        }
    }

    /// Integration nodes `(z, weight)`: composite midpoint for the uniform
    /// case, the atoms (zero-probability ones pruned) for the discrete case.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        match self {
            NetDemandModel::Uniform {
                lo,
                hi,
                quadrature_nodes,
            } => {
                let n = *quadrature_nodes;
                let h = (hi - lo) / n as f64;
                (0..n).map(|k| (lo + (k as f64 + 0.5) * h, 1.0 / n as f64)).collect()
            }
            NetDemandModel::Discrete { values, probs } => values
                .iter()
                .zip(probs)
                .filter(|(_, &p)| p > 0.0)
                .map(|(&v, &p)| (v, p))
                .collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            NetDemandModel::Uniform { lo, hi, .. } => 0.5 * (lo + hi),
            NetDemandModel::Discrete { values, probs } => values.iter().zip(probs).map(|(v, p)| v * p).sum(),
        }
    }

    /// Largest absolute value in the support.
    pub fn max_abs(&self) -> f64 {
        match self {
            NetDemandModel::Uniform { lo, hi, .. } => lo.abs().max(hi.abs()),
            NetDemandModel::Discrete { values, probs } => values
                .iter()
                .zip(probs)
                .filter(|(_, &p)| p > 0.0)
                .map(|(v, _)| v.abs())
                .fold(0.0, f64::max),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, NetDemandModel::Discrete { .. })
    }

    pub fn sampler(&self) -> DemandSampler {
        match self {
            NetDemandModel::Uniform { lo, hi, .. } => DemandSampler::Uniform { lo: *lo, hi: *hi },
            NetDemandModel::Discrete { values, probs } => DemandSampler::Discrete {
                values: values.clone(),
                index: WeightedIndex::new(probs).expect("validated demand distribution"),
            },
        }
    }
}

#[derive(Debug, Clone)]
pub enum DemandSampler {
    Uniform {
        lo: f64,
        hi: f64,
    },
    Discrete {
        values: Vec<f64>,
        index: WeightedIndex<f64>,
    },
}

impl DemandSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            DemandSampler::Uniform { lo, hi } => rng.gen_range(*lo..*hi),
            DemandSampler::Discrete { values, index } => values[index.sample(rng)],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_nodes_cover_support() {
        let m = NetDemandModel::Uniform {
            lo: 0.0,
            hi: 100.0,
            quadrature_nodes: 4,
        };
        let nodes = m.nodes();
        assert_eq!(
            nodes.iter().map(|n| n.0).collect::<Vec<_>>(),
            vec![12.5, 37.5, 62.5, 87.5]
        );
        assert!((nodes.iter().map(|n| n.1).sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_probability_atoms_are_pruned() {
        let m = NetDemandModel::discrete(vec![8.0, 16.0, 99.0], vec![0.5, 0.5, 0.0]);
        assert_eq!(m.nodes(), vec![(8.0, 0.5), (16.0, 0.5)]);
        assert_eq!(m.max_abs(), 16.0);
    }

    #[test]
    fn rejects_empty_uniform_support() {
        assert!(NetDemandModel::uniform(5.0, 5.0).validate().is_err());
    }
}
