//! Load strategies: a day-ahead reporting map `theta -> theta_hat` and a
//! real-time reporting policy chosen as a function of `theta`.
//!
//! A policy instance is owned by one simulated load. It sees exactly the
//! load's private information: its own type each day, the curtailments it
//! was dispatched on earlier days (via [`RealTimePolicy::observe`]) and the
//! scheduled generator output (via [`RealTimePolicy::start`]).

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::RngCore;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{TypeDistribution, TypeIdx, TypeSpace};

/// Declarative description of a library strategy, embedded in the
/// experiment configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StrategySpec {
    /// Reports the true distribution and the true type every day.
    #[default]
    Truthful,
    /// Reports a fixed distribution day-ahead, truthful in real time.
    DistMisreport { reported: TypeDistribution },
    /// Reports `typeMap[type]` in real time; unmapped types are truthful.
    TypeMisreport {
        #[serde(rename = "typeMap")]
        type_map: BTreeMap<String, String>,
    },
    /// Reports the type with baseline `min(d + delta, dMax)` and the same
    /// cost coefficient.
    BaselineInflate { delta: u32 },
    /// Reports the type with the same baseline and the mapped cost
    /// coefficient.
    CostExaggerate {
        #[serde(rename = "kappaMap")]
        kappa_map: BTreeMap<String, f64>,
    },
    /// Applies `inner`'s real-time misreport on days divisible by `period`,
    /// truthful otherwise.
    Intermittent { inner: Box<StrategySpec>, period: u64 },
}

impl StrategySpec {
    pub fn dist_misreport(probs: Vec<f64>) -> Result<Self> {
        Ok(StrategySpec::DistMisreport {
            reported: TypeDistribution::new(probs).map_err(Error::Strategy)?,
        })
    }

    pub fn type_swap(a: &str, b: &str) -> Self {
        let mut type_map = BTreeMap::new();
        type_map.insert(a.to_string(), b.to_string());
        type_map.insert(b.to_string(), a.to_string());
        StrategySpec::TypeMisreport { type_map }
    }

    pub fn type_map(pairs: &[(&str, &str)]) -> Self {
        StrategySpec::TypeMisreport {
            type_map: pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        }
    }

    pub fn cost_exaggerate(pairs: &[(&str, f64)]) -> Self {
        StrategySpec::CostExaggerate {
            kappa_map: pairs.iter().map(|(a, k)| (a.to_string(), *k)).collect(),
        }
    }

    pub fn intermittent(inner: StrategySpec, period: u64) -> Self {
        StrategySpec::Intermittent {
            inner: Box::new(inner),
            period,
        }
    }

    /// Stable label: the compact JSON of this value.
    pub fn label(&self) -> String {
        serde_json::to_string(self).expect("strategy spec serializes")
    }

    /// The day-ahead report this strategy makes for true distribution `theta`.
    pub fn day_ahead_report(&self, theta: &TypeDistribution) -> TypeDistribution {
        match self {
            StrategySpec::DistMisreport { reported } => reported.clone(),
            _ => theta.clone(),
        }
    }

    /// Checks this strategy against a type space and the true distribution it
    /// will be applied to.
    pub fn validate(&self, space: &TypeSpace, theta: &TypeDistribution) -> Result<(), String> {
        if let StrategySpec::DistMisreport { reported } = self {
            if reported.len() != space.len() {
                return Err(format!(
                    "reported distribution has {} entries but the type space has {}",
                    reported.len(),
                    space.len()
                ));
            }
            crate::model::distribution::check_simplex(reported.probs())?;
        }
        type_mapping(self, space).map_err(|e| e.to_string())?;
        let inner = match self {
            StrategySpec::Intermittent { inner, .. } => inner.as_ref(),
            s => s,
        };
        if let StrategySpec::BaselineInflate { delta } = inner {
            for idx in theta.support() {
                let ty = space.get(idx);
                let target = (ty.baseline + delta).min(space.d_max);
                if target != ty.baseline && space.find(target, ty.kappa).is_none() {
                    return Err(format!(
                        "inflated type (baseline {target}, kappa {}) for `{}` is absent from the type space",
                        ty.kappa, ty.id
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Resolves a real-time misreport into a per-type mapping; `None` for
/// strategies that report types truthfully.
fn type_mapping(spec: &StrategySpec, space: &TypeSpace) -> Result<Option<Vec<TypeIdx>>> {
    let identity: Vec<TypeIdx> = space.indices().collect();
    match spec {
        StrategySpec::Truthful | StrategySpec::DistMisreport { .. } => Ok(None),
        StrategySpec::TypeMisreport { type_map } => {
            let mut map = identity;
            for (from, to) in type_map {
                let f = space
                    .index_of(from)
                    .ok_or_else(|| Error::Strategy(format!("typeMap source `{from}` is not in the type space")))?;
                let t = space
                    .index_of(to)
                    .ok_or_else(|| Error::Strategy(format!("typeMap image `{to}` is not in the type space")))?;
                map[f.get()] = t;
            }
            Ok(Some(map))
        }
        StrategySpec::BaselineInflate { delta } => {
            // types without an inflated counterpart report truthfully;
            // `validate` rejects that case on the load's support
            let map = space
                .indices()
                .map(|idx| {
                    let ty = space.get(idx);
                    space
                        .find((ty.baseline + delta).min(space.d_max), ty.kappa)
                        .unwrap_or(idx)
                })
                .collect();
            Ok(Some(map))
        }
        StrategySpec::CostExaggerate { kappa_map } => {
            let mut map = identity;
            for (from, kappa) in kappa_map {
                let f = space
                    .index_of(from)
                    .ok_or_else(|| Error::Strategy(format!("kappaMap source `{from}` is not in the type space")))?;
                let base = space.get(f).baseline;
                map[f.get()] = space.find(base, *kappa).ok_or_else(|| {
                    Error::Strategy(format!("no type with baseline {base} and kappa {kappa} for `{from}`"))
                })?;
            }
            Ok(Some(map))
        }
        StrategySpec::Intermittent { inner, period } => {
            if *period == 0 {
                return Err(Error::Strategy("intermittent period must be positive".into()));
            }
            match inner.as_ref() {
                StrategySpec::TypeMisreport { .. }
                | StrategySpec::BaselineInflate { .. }
                | StrategySpec::CostExaggerate { .. } => type_mapping(inner, space),
                _ => Err(Error::Strategy(
                    "intermittent requires a real-time misreport (type-misreport, baseline-inflate or cost-exaggerate)"
                        .into(),
                )),
            }
        }
    }
}

/// A real-time reporting policy (one element of the policy set).
pub trait RealTimePolicy: Send {
    /// Called once, after the day-ahead dispatch `g_star` is published.
    fn start(&mut self, _g_star: f64) {}

    /// Type to report on `day` (1-based) given today's true type.
    fn report(&mut self, day: u64, true_type: TypeIdx, rng: &mut dyn RngCore) -> TypeIdx;

    /// Curtailment the operator dispatched this load on the day just
    /// reported.
    fn observe(&mut self, _curtailment: f64) {}
}

/// Reports `map[type]` on active days and the true type otherwise.
#[derive(Debug, Clone)]
pub struct MappedPolicy {
    map: Option<Vec<TypeIdx>>,
    period: Option<u64>,
}

impl RealTimePolicy for MappedPolicy {
    fn report(&mut self, day: u64, true_type: TypeIdx, _rng: &mut dyn RngCore) -> TypeIdx {
        match &self.map {
            Some(map) if self.period.map_or(true, |p| day % p == 0) => map[true_type.get()],
            _ => true_type,
        }
    }
}

type DayAheadFn = dyn Fn(&TypeDistribution) -> TypeDistribution + Send + Sync;
type PolicyFn = dyn Fn(&TypeDistribution) -> Box<dyn RealTimePolicy> + Send + Sync;

/// A complete strategy: both maps are fixed before the load observes its
/// true distribution.
#[derive(Clone)]
pub struct Strategy {
    label: String,
    spec: Option<StrategySpec>,
    day_ahead: Arc<DayAheadFn>,
    real_time: Arc<PolicyFn>,
}

impl fmt::Debug for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Strategy").field("label", &self.label).finish()
    }
}

impl Strategy {
    /// A strategy outside the declarative library.
    pub fn custom(
        label: impl Into<String>,
        day_ahead: impl Fn(&TypeDistribution) -> TypeDistribution + Send + Sync + 'static,
        real_time: impl Fn(&TypeDistribution) -> Box<dyn RealTimePolicy> + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            spec: None,
            day_ahead: Arc::new(day_ahead),
            real_time: Arc::new(real_time),
        }
    }

    pub fn truthful() -> Self {
        Self {
            label: StrategySpec::Truthful.label(),
            spec: Some(StrategySpec::Truthful),
            day_ahead: Arc::new(|theta| theta.clone()),
            real_time: Arc::new(|_| {
                Box::new(MappedPolicy {
                    map: None,
                    period: None,
                })
            }),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn spec(&self) -> Option<&StrategySpec> {
        self.spec.as_ref()
    }

    /// `sigma(theta)`.
    pub fn report_distribution(&self, theta: &TypeDistribution) -> TypeDistribution {
        (self.day_ahead)(theta)
    }

    /// `mu(theta)`: a fresh real-time policy for a load with distribution
    /// `theta`.
    pub fn policy(&self, theta: &TypeDistribution) -> Box<dyn RealTimePolicy> {
        (self.real_time)(theta)
    }
}

/// Builds the strategy described by `spec` over `space`.
pub fn make_strategy(spec: &StrategySpec, space: &TypeSpace) -> Result<Strategy> {
    let map = type_mapping(spec, space)?;
    let period = match spec {
        StrategySpec::Intermittent { period, .. } => Some(*period),
        _ => None,
    };
    let day_ahead_spec = spec.clone();
    Ok(Strategy {
        label: spec.label(),
        spec: Some(spec.clone()),
        day_ahead: Arc::new(move |theta| day_ahead_spec.day_ahead_report(theta)),
        real_time: Arc::new(move |_| {
            Box::new(MappedPolicy {
                map: map.clone(),
                period,
            })
        }),
    })
}

/// Exact truthfulness: only the `truthful` kind qualifies.
pub fn is_truthful(spec: &StrategySpec) -> bool {
    matches!(spec, StrategySpec::Truthful)
}

/// Warns when a non-truthful kind behaves identically to truth-telling on
/// `space` (for example an identity cost map).
pub fn truthfulness_warning(spec: &StrategySpec, space: &TypeSpace) -> Option<String> {
    if is_truthful(spec) || matches!(spec, StrategySpec::DistMisreport { .. }) {
        return None;
    }
    let identity: Vec<TypeIdx> = space.indices().collect();
    match type_mapping(spec, space) {
        Ok(Some(map)) if map == identity => Some(format!(
            "strategy {} is classified non-truthful by kind but reports every type truthfully",
            spec.label()
        )),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LoadType;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn space() -> TypeSpace {
        TypeSpace::new(
            4,
            vec![
                LoadType::new("a", 3, 1.0),
                LoadType::new("b", 4, 1.0),
                LoadType::new("c", 3, 2.0),
            ],
        )
    }

    fn reports(s: &Strategy, theta: &TypeDistribution, days: &[(u64, u16)]) -> Vec<u16> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = s.policy(theta);
        days.iter().map(|&(d, t)| p.report(d, TypeIdx(t), &mut rng).0).collect()
    }

    #[test]
    fn truthful_is_identity() {
        let theta = TypeDistribution::new(vec![0.3, 0.7, 0.0]).unwrap();
        let s = make_strategy(&StrategySpec::Truthful, &space()).unwrap();
        assert_eq!(s.report_distribution(&theta), theta);
        assert_eq!(reports(&s, &theta, &[(1, 0), (2, 1), (3, 2)]), vec![0, 1, 2]);
    }

    #[test]
    fn dist_misreport_is_truthful_in_real_time() {
        let theta = TypeDistribution::new(vec![0.5, 0.5, 0.0]).unwrap();
        let spec = StrategySpec::dist_misreport(vec![0.9, 0.1, 0.0]).unwrap();
        let s = make_strategy(&spec, &space()).unwrap();
        assert_eq!(s.report_distribution(&theta).probs(), &[0.9, 0.1, 0.0]);
        assert_eq!(reports(&s, &theta, &[(1, 0), (2, 1)]), vec![0, 1]);
    }

    #[test]
    fn baseline_inflation_reports_the_higher_baseline() {
        let theta = TypeDistribution::degenerate(3, TypeIdx(0));
        let spec = StrategySpec::BaselineInflate { delta: 1 };
        let s = make_strategy(&spec, &space()).unwrap();
        assert_eq!(reports(&s, &theta, &[(1, 0), (2, 0), (3, 0)]), vec![1, 1, 1]);
    }

    #[test]
    fn baseline_inflation_requires_target_type() {
        let sp = TypeSpace::new(4, vec![LoadType::new("a", 3, 1.0), LoadType::new("c", 3, 2.0)]);
        let spec = StrategySpec::BaselineInflate { delta: 1 };
        let theta = TypeDistribution::new(vec![0.5, 0.5]).unwrap();
        let err = spec.validate(&sp, &theta).unwrap_err();
        assert!(err.contains("absent"), "{err}");
        // at dMax the type itself is the inflated type
        let sp = TypeSpace::new(3, vec![LoadType::new("a", 3, 1.0)]);
        assert!(spec.validate(&sp, &TypeDistribution::uniform(1)).is_ok());
    }

    #[test]
    fn type_map_outside_space_is_rejected() {
        let spec = StrategySpec::type_map(&[("a", "zz")]);
        assert!(make_strategy(&spec, &space()).is_err());
    }

    #[test]
    fn intermittent_misreports_on_period_days() {
        let theta = TypeDistribution::uniform(3);
        let spec = StrategySpec::intermittent(StrategySpec::type_swap("a", "c"), 3);
        let s = make_strategy(&spec, &space()).unwrap();
        let got = reports(&s, &theta, &[(1, 0), (2, 0), (3, 0), (6, 2), (7, 2)]);
        assert_eq!(got, vec![0, 0, 2, 0, 2]);
        assert!(!is_truthful(&StrategySpec::intermittent(
            StrategySpec::type_swap("a", "c"),
            1_000_000_000
        )));
    }

    #[test]
    fn identity_cost_map_warns() {
        let spec = StrategySpec::cost_exaggerate(&[("a", 1.0)]);
        assert!(!is_truthful(&spec));
        assert!(truthfulness_warning(&spec, &space()).is_some());
        assert!(truthfulness_warning(&StrategySpec::cost_exaggerate(&[("a", 2.0)]), &space()).is_none());
        assert!(is_truthful(&StrategySpec::Truthful));
    }

    #[test]
    fn spec_json_shape() {
        let spec = StrategySpec::intermittent(StrategySpec::cost_exaggerate(&[("a", 2.0)]), 5);
        let json = spec.label();
        assert_eq!(
            json,
            r#"{"kind":"intermittent","inner":{"kind":"cost-exaggerate","kappaMap":{"a":2.0}},"period":5}"#
        );
        let back: StrategySpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }
}
