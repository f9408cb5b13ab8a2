use std::collections::BTreeMap;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::types::{LoadType, TypeSpace};
use crate::error::{Error, Result};

/// Piecewise-linear cost through `(x, cost)` points, extrapolated linearly
/// past both ends.
fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    let seg = match points.iter().position(|p| p.0 >= x) {
        Some(0) => 0,
        Some(k) => k - 1,
        None => points.len() - 2,
    };
    let (x0, y0) = points[seg];
    let (x1, y1) = points[seg + 1];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

fn check_points(points: &[(f64, f64)]) -> Result<(), String> {
    if points.len() < 2 {
        return Err("tabulated cost needs at least two points".into());
    }
    if points.iter().any(|p| !(p.0.is_finite() && p.1.is_finite())) {
        return Err("tabulated cost points must be finite".into());
    }
    if points.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err("tabulated cost abscissae must be strictly increasing".into());
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorCost {
    /// No day-ahead generator; dispatch is fixed at zero.
    Disabled,
    /// `a * g^2`.
    Quadratic {
        a: f64,
    },
    Tabulated {
        points: Vec<(f64, f64)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ReserveCost {
    /// `a * x^2`, defined for purchases and sales alike.
    Quadratic {
        a: f64,
    },
    Tabulated {
        points: Vec<(f64, f64)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LoadCostFamily {
    /// `kappa / 2 * x^2` with the type's `kappa`, for any real `x`.
    Quadratic,
    /// Arbitrary costs on the integer curtailment grid
    /// `minCurtailment, minCurtailment + 1, ...`, one table per type id.
    Tabulated {
        #[serde(rename = "minCurtailment")]
        min_curtailment: i64,
        tables: BTreeMap<String, Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CostModel {
    #[serde(default = "default_generator")]
    pub generator: GeneratorCost,
    pub reserve: ReserveCost,
    #[serde(default = "default_load_family")]
    pub load: LoadCostFamily,
}

fn default_generator() -> GeneratorCost {
    GeneratorCost::Disabled
}

fn default_load_family() -> LoadCostFamily {
    LoadCostFamily::Quadratic
}

/// Which cost function to evaluate.
#[derive(Debug, Clone, Copy)]
pub enum Entity<'a> {
    Generator,
    Reserve,
    Load(&'a LoadType),
}

impl CostModel {
    /// Quadratic reserve and loads, generator disabled.
    pub fn quadratic(reserve_a: f64) -> Self {
        Self {
            generator: GeneratorCost::Disabled,
            reserve: ReserveCost::Quadratic { a: reserve_a },
            load: LoadCostFamily::Quadratic,
        }
    }

    pub fn with_generator(mut self, generator: GeneratorCost) -> Self {
        self.generator = generator;
        self
    }

    pub fn generator_enabled(&self) -> bool {
        !matches!(self.generator, GeneratorCost::Disabled)
    }

    /// True when every cost function is a convex quadratic, which is what the
    /// closed-form dispatch path requires.
    pub fn is_convex(&self) -> bool {
        matches!(self.reserve, ReserveCost::Quadratic { .. })
            && matches!(self.load, LoadCostFamily::Quadratic)
            && !matches!(self.generator, GeneratorCost::Tabulated { .. })
    }

    /// Reserve coefficient when the reserve cost is quadratic.
    pub fn reserve_quadratic(&self) -> Option<f64> {
        match self.reserve {
            ReserveCost::Quadratic { a } => Some(a),
            ReserveCost::Tabulated { .. } => None,
        }
    }

    pub fn generator(&self, g: f64) -> f64 {
        match &self.generator {
            GeneratorCost::Disabled => 0.0,
            GeneratorCost::Quadratic { a } => a * g * g,
            GeneratorCost::Tabulated { points } => interpolate(points, g),
        }
    }

    pub fn reserve(&self, x: f64) -> f64 {
        match &self.reserve {
            ReserveCost::Quadratic { a } => a * x * x,
            ReserveCost::Tabulated { points } => interpolate(points, x),
        }
    }

    /// Cost to a load of type `ty` for consuming `x` below its baseline.
    pub fn load(&self, ty: &LoadType, x: f64) -> Result<f64> {
        match &self.load {
            LoadCostFamily::Quadratic => Ok(0.5 * ty.kappa * x * x),
            LoadCostFamily::Tabulated {
                min_curtailment,
                tables,
            } => {
                let table = tables
                    .get(&ty.id)
                    .ok_or_else(|| Error::Cost(format!("no cost table for type `{}`", ty.id)))?;
                let k = x.round();
                if (x - k).abs() > 1e-9 {
                    return Err(Error::Cost(format!(
                        "curtailment {x} is off the integer grid of the tabulated family"
                    )));
                }
                let offset = k as i64 - min_curtailment;
                usize::try_from(offset)
                    .ok()
                    .and_then(|o| table.get(o).copied())
                    .ok_or_else(|| {
                        Error::Cost(format!(
                            "curtailment {x} outside the tabulated grid [{min_curtailment}, {}]",
                            min_curtailment + table.len() as i64 - 1
                        ))
                    })
            }
        }
    }

    /// Integer curtailment grid of the tabulated load family.
    pub fn load_grid(&self) -> Option<(i64, i64)> {
        match &self.load {
            LoadCostFamily::Quadratic => None,
            LoadCostFamily::Tabulated {
                min_curtailment,
                tables,
            } => {
                let len = tables.values().map(Vec::len).min().unwrap_or(0) as i64;
                Some((*min_curtailment, min_curtailment + len - 1))
            }
        }
    }

    pub fn validate(&self, space: &TypeSpace) -> Result<(), Vec<(String, String)>> {
        let mut errs = Vec::new();
        match &self.generator {
            GeneratorCost::Quadratic { a } if !(a.is_finite() && *a >= 0.0) => errs.push((
                "costs.generator.a".into(),
                format!("generator coefficient must be finite and >= 0 (got {a})"),
            )),
            GeneratorCost::Tabulated { points } => {
                if let Err(e) = check_points(points) {
                    errs.push(("costs.generator.points".into(), e));
                }
            }
            _ => {}
        }
        match &self.reserve {
            ReserveCost::Quadratic { a } if !(a.is_finite() && *a >= 0.0) => errs.push((
                "costs.reserve.a".into(),
                format!("reserve coefficient must be finite and >= 0 (got {a})"),
            )),
            ReserveCost::Tabulated { points } => {
                if let Err(e) = check_points(points) {
                    errs.push(("costs.reserve.points".into(), e));
                }
            }
            _ => {}
        }
        match &self.load {
            LoadCostFamily::Quadratic => {
                for (k, t) in space.types.iter().enumerate() {
                    if !(t.kappa.is_finite() && t.kappa > 0.0) {
                        errs.push((
                            format!("typeSpace.types[{k}].kappa"),
                            format!("kappa must be positive for the quadratic family (got {})", t.kappa),
                        ));
                    }
                }
            }
            LoadCostFamily::Tabulated { tables, .. } => {
                let mut len = None;
                for t in &space.types {
                    match tables.get(&t.id) {
                        None => errs.push((
                            "costs.load.tables".into(),
                            format!("missing cost table for type `{}`", t.id),
                        )),
                        Some(tab) => {
                            if tab.is_empty() || tab.iter().any(|c| !c.is_finite()) {
                                errs.push((
                                    format!("costs.load.tables.{}", t.id),
                                    "cost table must be nonempty and finite".into(),
                                ));
                            }
                            if *len.get_or_insert(tab.len()) != tab.len() {
                                errs.push((
                                    format!("costs.load.tables.{}", t.id),
                                    "all cost tables must share one grid".into(),
                                ));
                            }
                        }
                    }
                }
                for id in tables.keys() {
                    if space.index_of(id).is_none() {
                        errs.push(("costs.load.tables".into(), format!("table for unknown type `{id}`")));
                    }
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

/// Evaluates one entity's cost at `x`.
pub fn eval_cost(model: &CostModel, entity: Entity<'_>, x: f64) -> Result<f64> {
    match entity {
        Entity::Generator => Ok(model.generator(x)),
        Entity::Reserve => Ok(model.reserve(x)),
        Entity::Load(ty) => model.load(ty, x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_examples() {
        let m = CostModel::quadratic(5.0);
        assert_eq!(eval_cost(&m, Entity::Reserve, 4.0).unwrap(), 80.0);
        let k2 = LoadType::new("k2", 0, 2.0);
        assert_eq!(eval_cost(&m, Entity::Load(&k2), 0.0).unwrap(), 0.0);
        let k1 = LoadType::new("k1", 0, 1.0);
        assert_eq!(eval_cost(&m, Entity::Load(&k1), 10.0).unwrap(), 50.0);
        // over-consumption uses the same formula
        assert_eq!(eval_cost(&m, Entity::Load(&k1), -2.0).unwrap(), 2.0);
    }

    #[test]
    fn tabulated_rejects_off_grid() {
        let mut tables = BTreeMap::new();
        tables.insert("a".to_string(), vec![0.0, 1.0, 5.0]);
        let m = CostModel {
            generator: GeneratorCost::Disabled,
            reserve: ReserveCost::Quadratic { a: 1.0 },
            load: LoadCostFamily::Tabulated {
                min_curtailment: 0,
                tables,
            },
        };
        let a = LoadType::new("a", 2, 1.0);
        assert_eq!(m.load(&a, 2.0).unwrap(), 5.0);
        assert!(m.load(&a, 0.5).is_err());
        assert!(m.load(&a, 3.0).is_err());
        assert!(m.load(&a, -1.0).is_err());
        assert_eq!(m.load_grid(), Some((0, 2)));
    }

    #[test]
    fn interpolation_extrapolates_linearly() {
        let pts = [(0.0, 0.0), (1.0, 2.0), (2.0, 6.0)];
        assert_eq!(interpolate(&pts, 0.5), 1.0);
        assert_eq!(interpolate(&pts, 3.0), 10.0);
        assert_eq!(interpolate(&pts, -1.0), -2.0);
    }
}
