use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::types::TypeIdx;

/// Tolerance on `sum(probs) == 1`.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

/// A probability vector over the type space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(transparent)]
pub struct TypeDistribution(Vec<f64>);

impl TypeDistribution {
    /// Builds a distribution, checking the simplex constraint.
    pub fn new(probs: Vec<f64>) -> Result<Self, String> {
        check_simplex(&probs)?;
        Ok(Self(probs))
    }

    pub fn degenerate(len: usize, at: TypeIdx) -> Self {
        let mut probs = vec![0.0; len];
        probs[at.get()] = 1.0;
        Self(probs)
    }

    pub fn uniform(len: usize) -> Self {
        Self(vec![1.0 / len as f64; len])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn prob(&self, idx: TypeIdx) -> f64 {
        self.0[idx.get()]
    }

    /// Types with strictly positive probability, in type-space order.
    pub fn support(&self) -> Vec<TypeIdx> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, _)| TypeIdx::from(i))
            .collect()
    }

    pub fn total_variation(&self, other: &TypeDistribution) -> f64 {
        0.5 * self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }

    pub fn sampler(&self) -> TypeSampler {
        TypeSampler {
            index: WeightedIndex::new(&self.0).expect("validated distribution"),
        }
    }
}

pub(crate) fn check_simplex(probs: &[f64]) -> Result<(), String> {
    if probs.is_empty() {
        return Err("distribution is empty".into());
    }
    if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(format!("probabilities must be finite and nonnegative (found {p})"));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
        return Err(format!("probabilities sum to {sum}"));
    }
    Ok(())
}

/// Draws types from one [`TypeDistribution`].
#[derive(Debug, Clone)]
pub struct TypeSampler {
    index: WeightedIndex<f64>,
}

impl TypeSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TypeIdx {
        TypeIdx::from(self.index.sample(rng))
    }
}

/// Product model: one independent type distribution per load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTypeModel {
    per_load: Vec<TypeDistribution>,
}

/// Loads sharing one distribution. Members are listed in increasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadGroup {
    pub distribution: TypeDistribution,
    pub members: Vec<usize>,
}

impl JointTypeModel {
    pub fn new(per_load: Vec<TypeDistribution>) -> Self {
        Self { per_load }
    }

    pub fn n_loads(&self) -> usize {
        self.per_load.len()
    }

    pub fn per_load(&self) -> &[TypeDistribution] {
        &self.per_load
    }

    pub fn load(&self, i: usize) -> &TypeDistribution {
        &self.per_load[i]
    }

    /// The model with load `i` removed entirely.
    pub fn without(&self, i: usize) -> Self {
        let mut per_load = self.per_load.clone();
        per_load.remove(i);
        Self { per_load }
    }

    /// Partitions loads into groups of identical distributions, ordered by
    /// first member.
    pub fn groups(&self) -> Vec<LoadGroup> {
        let mut groups: Vec<LoadGroup> = Vec::new();
        for (i, dist) in self.per_load.iter().enumerate() {
            match groups.iter_mut().find(|g| g.distribution == *dist) {
                Some(g) => g.members.push(i),
                None => groups.push(LoadGroup {
                    distribution: dist.clone(),
                    members: vec![i],
                }),
            }
        }
        groups
    }
}
