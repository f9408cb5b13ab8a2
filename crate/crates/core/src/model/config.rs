//! Experiment configuration: a JSON document validated into an
//! [`ExperimentConfig`].

use std::fmt;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::cost::CostModel;
use super::demand::NetDemandModel;
use super::distribution::{check_simplex, JointTypeModel, TypeDistribution};
use super::penalty::PenaltySchedule;
use super::types::TypeSpace;
use super::System;
use crate::agents::{make_strategy, Strategy, StrategySpec};

/// Maximum number of reduced type profiles for exact enumeration.
pub const ENUMERATION_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMode {
    /// Types carry baselines; the real-time mismatch includes the reported
    /// baselines.
    #[default]
    ExplicitBaseline,
    /// Baselines are folded into the net demand; every baseline is zero.
    NetDemand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum CurtailmentBounds {
    #[default]
    Unconstrained,
    /// `0 <= curtailment <= reported baseline`.
    Box,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "method", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExpectationMethod {
    /// Exact over reduced type profiles, quadrature over `z`.
    #[default]
    Enumerate,
    /// Sample average over `samples` draws of `(z, types)`.
    MonteCarlo {
        samples: usize,
        /// Defaults to a stream derived from the experiment seed.
        #[serde(default)]
        seed: Option<u64>,
    },
}

/// How a load's true curtailment cost is charged in its utility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum UtilityConvention {
    /// Cost of the physical reduction below the true baseline,
    /// `pi - (reported baseline - true baseline)`.
    #[default]
    PhysicalReduction,
    /// Cost of the commanded curtailment `pi`, regardless of the baseline
    /// report.
    Literal,
}

/// `count` loads sharing a true type distribution and a strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LoadGroupSpec {
    pub count: usize,
    pub distribution: TypeDistribution,
    #[serde(default)]
    pub strategy: StrategySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub days: u64,
    #[serde(default)]
    pub mode: BaselineMode,
    #[serde(default)]
    pub curtailment_bounds: CurtailmentBounds,
    pub type_space: TypeSpace,
    pub loads: Vec<LoadGroupSpec>,
    pub net_demand: NetDemandModel,
    pub costs: CostModel,
    #[serde(default)]
    pub penalty: PenaltySchedule,
    #[serde(default)]
    pub expectation: ExpectationMethod,
    #[serde(default)]
    pub utility_convention: UtilityConvention,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

/// Every violated invariant found while validating a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub diagnostics: Vec<Diagnostic>,
}

impl ConfigError {
    pub fn single(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            diagnostics: vec![Diagnostic {
                field: field.into(),
                message: message.into(),
            }],
        }
    }

    /// True if any diagnostic message contains `needle`.
    pub fn mentions(&self, needle: &str) -> bool {
        self.diagnostics
            .iter()
            .any(|d| d.message.contains(needle) || d.field.contains(needle))
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, d) in self.diagnostics.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: {}", d.field, d.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

/// Parses and validates a configuration document.
pub fn validate_config(raw: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig =
        serde_json::from_str(raw).map_err(|e| ConfigError::single("<document>", e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Validates an already-parsed JSON value.
pub fn validate_value(raw: serde_json::Value) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig =
        serde_json::from_value(raw).map_err(|e| ConfigError::single("<document>", e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Number of distinct type multisets enumerated for `model`, after merging
/// loads with identical distributions.
pub fn reduced_profile_count(model: &JointTypeModel) -> f64 {
    model
        .groups()
        .iter()
        .map(|g| {
            let k = g.distribution.support().len().max(1);
            binomial(g.members.len() + k - 1, k - 1)
        })
        .product()
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut diags = Vec::new();
        let mut push = |field: String, message: String| diags.push(Diagnostic { field, message });

        if self.days == 0 {
            push("days".into(), "horizon must be at least one day".into());
        }

        let space = &self.type_space;
        if space.is_empty() {
            push("typeSpace.types".into(), "type space must be nonempty".into());
        }
        if space.len() > u16::MAX as usize {
            push("typeSpace.types".into(), "type space too large".into());
        }
        for (k, t) in space.types.iter().enumerate() {
            if space.types[..k].iter().any(|o| o.id == t.id) {
                push(
                    format!("typeSpace.types[{k}].id"),
                    format!("duplicate type id `{}`", t.id),
                );
            }
            if t.baseline > space.d_max {
                push(
                    format!("typeSpace.types[{k}].baseline"),
                    format!("baseline {} exceeds dMax {}", t.baseline, space.d_max),
                );
            }
            if !t.kappa.is_finite() {
                push(format!("typeSpace.types[{k}].kappa"), "kappa must be finite".into());
            }
        }

        if self.mode == BaselineMode::NetDemand {
            if space.types.iter().any(|t| t.baseline != 0) {
                push(
                    "typeSpace.types".into(),
                    "baselines must be 0 in net-demand mode".into(),
                );
            }
            if self.curtailment_bounds != CurtailmentBounds::Unconstrained {
                push(
                    "curtailmentBounds".into(),
                    "curtailment must be unconstrained in net-demand mode".into(),
                );
            }
        }

        if self.loads.is_empty() {
            push("loads".into(), "at least one load group is required".into());
        }
        let mut dist_ok = true;
        for (k, g) in self.loads.iter().enumerate() {
            if g.count == 0 {
                push(format!("loads[{k}].count"), "count must be positive".into());
            }
            if g.distribution.len() != space.len() {
                dist_ok = false;
                push(
                    format!("loads[{k}].distribution"),
                    format!(
                        "distribution has {} entries but the type space has {}",
                        g.distribution.len(),
                        space.len()
                    ),
                );
            } else if let Err(e) = check_simplex(g.distribution.probs()) {
                dist_ok = false;
                push(format!("loads[{k}].distribution"), e);
            }
            if let Err(e) = g.strategy.validate(space, &g.distribution) {
                dist_ok = false;
                push(format!("loads[{k}].strategy"), e);
            }
        }

        if let Err(e) = self.net_demand.validate() {
            push("netDemand".into(), e);
        }
        if let Err(errs) = self.costs.validate(space) {
            for (f, m) in errs {
                push(f, m);
            }
        }
        if let Err(errs) = self.penalty.validate() {
            for (f, m) in errs {
                push(f, m);
            }
        }

        match self.expectation {
            ExpectationMethod::MonteCarlo { samples: 0, .. } => {
                push("expectation.samples".into(), "samples must be positive".into());
            }
            ExpectationMethod::Enumerate if dist_ok && !self.loads.is_empty() => {
                let count = reduced_profile_count(&self.day_ahead_model());
                if count > ENUMERATION_LIMIT {
                    push(
                        "expectation".into(),
                        format!(
                            "enumeration needs {count:.3e} reduced profiles (limit {ENUMERATION_LIMIT:e}); use monte-carlo"
                        ),
                    );
                }
            }
            _ => {}
        }

        if diags.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { diagnostics: diags })
        }
    }

    pub fn n_loads(&self) -> usize {
        self.loads.iter().map(|g| g.count).sum()
    }

    /// True distributions, one per load.
    pub fn true_model(&self) -> JointTypeModel {
        JointTypeModel::new(
            self.loads
                .iter()
                .flat_map(|g| std::iter::repeat(g.distribution.clone()).take(g.count))
                .collect(),
        )
    }

    /// Distributions the loads' strategies report day-ahead.
    pub fn day_ahead_model(&self) -> JointTypeModel {
        JointTypeModel::new(
            self.loads
                .iter()
                .flat_map(|g| {
                    let reported = g.strategy.day_ahead_report(&g.distribution);
                    std::iter::repeat(reported).take(g.count)
                })
                .collect(),
        )
    }

    /// One strategy per load, in load order.
    pub fn strategies(&self) -> crate::Result<Vec<Strategy>> {
        let mut out = Vec::with_capacity(self.n_loads());
        for g in &self.loads {
            let s = make_strategy(&g.strategy, &self.type_space)?;
            out.extend(std::iter::repeat(s).take(g.count));
        }
        Ok(out)
    }

    pub fn system(&self) -> System {
        System {
            type_space: self.type_space.clone(),
            net_demand: self.net_demand.clone(),
            costs: self.costs.clone(),
            bounds: self.curtailment_bounds,
        }
    }

    /// Seed of the Monte Carlo expectation stream.
    pub fn expectation_seed(&self) -> u64 {
        match self.expectation {
            ExpectationMethod::MonteCarlo { seed: Some(s), .. } => s,
            _ => self.seed ^ 0x5eed_e4be_c7a7_10c5,
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// JSON schema of the configuration document, including defaults.
pub fn config_schema() -> serde_json::Value {
    let schema = schemars::schema_for!(ExperimentConfig);
    serde_json::to_value(schema).expect("schema serializes")
}
