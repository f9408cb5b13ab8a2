use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

/// Threshold and penalty sequences of the second-stage settlement:
///
/// `r(l) = m * sqrt(ln(2 l^(1+gamma)) / (2 l))` and `J_p(l) = l^e`, with
/// `m >= 1` and `e > 1` so that `r(l) -> 0`, `r` dominates the
/// concentration bound, and `J_p(l) / l -> inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PenaltySchedule {
    #[serde(default = "defaults::gamma")]
    pub gamma: f64,
    #[serde(default = "defaults::multiplier")]
    pub threshold_multiplier: f64,
    #[serde(default = "defaults::exponent")]
    pub penalty_exponent: f64,
}

mod defaults {
    pub fn gamma() -> f64 {
        1.0
    }
    pub fn multiplier() -> f64 {
        2.0
    }
    pub fn exponent() -> f64 {
        1.5
    }
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        Self {
            gamma: defaults::gamma(),
            threshold_multiplier: defaults::multiplier(),
            penalty_exponent: defaults::exponent(),
        }
    }
}

impl PenaltySchedule {
    pub fn with_multiplier(mut self, m: f64) -> Self {
        self.threshold_multiplier = m;
        self
    }

    /// `sqrt(ln(2 l^(1+gamma)) / (2 l))`, the smallest admissible threshold.
    pub fn lower_bound(&self, l: u64) -> f64 {
        let l = l as f64;
        ((2.0f64.ln() + (1.0 + self.gamma) * l.ln()) / (2.0 * l)).sqrt()
    }

    /// Deviation threshold `r(l)` for day `l >= 1`.
    pub fn threshold(&self, l: u64) -> f64 {
        self.threshold_multiplier * self.lower_bound(l)
    }

    /// Penalty `J_p(l)` charged on a day whose event fires.
    pub fn penalty(&self, l: u64) -> f64 {
        (l as f64).powf(self.penalty_exponent)
    }

    pub fn validate(&self) -> Result<(), Vec<(String, String)>> {
        let mut errs = Vec::new();
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            errs.push((
                "penalty.gamma".into(),
                format!("gamma must be > 0 (got {})", self.gamma),
            ));
        }
        if !(self.threshold_multiplier.is_finite() && self.threshold_multiplier >= 1.0) {
            errs.push((
                "penalty.thresholdMultiplier".into(),
                format!("thresholdMultiplier must be >= 1 (got {})", self.threshold_multiplier),
            ));
        }
        if !(self.penalty_exponent.is_finite() && self.penalty_exponent > 1.0) {
            errs.push((
                "penalty.penaltyExponent".into(),
                format!("penaltyExponent must be > 1 (got {})", self.penalty_exponent),
            ));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}
