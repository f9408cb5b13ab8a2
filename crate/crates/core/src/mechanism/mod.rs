//! Settlement rules: first-stage VCG payments, the second-stage settlement
//! with its deviation penalty, and utility accounting.

mod tracker;

pub use tracker::DeviationTracker;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PenaltySchedule, UtilityConvention};

/// `W*_{-i} - (W* - E[c_i])`.
pub fn first_stage_payment(w_minus_i: f64, w_star: f64, expected_load_cost_i: f64) -> f64 {
    w_minus_i - (w_star - expected_load_cost_i)
}

/// `(realized - expected) - J_p(l) * 1{event}`.
pub fn second_stage_settlement(
    day: u64,
    realized_reported_cost: f64,
    expected_load_cost_i: f64,
    event: bool,
    schedule: &PenaltySchedule,
) -> f64 {
    let base = realized_reported_cost - expected_load_cost_i;
    if event {
        base - schedule.penalty(day)
    } else {
        base
    }
}

/// One load's payment on one day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PaymentRecord {
    pub p1: f64,
    pub p2: f64,
    pub penalty_applied: bool,
    /// `J_p(l)` when applied, else 0.
    pub penalty: f64,
    pub total: f64,
    /// `c_i(pi_i, reported type)` of the day's dispatch.
    pub realized_reported_cost: f64,
}

impl PaymentRecord {
    pub fn settle(
        day: u64,
        p1: f64,
        realized_reported_cost: f64,
        expected_load_cost_i: f64,
        event: bool,
        schedule: &PenaltySchedule,
    ) -> Self {
        let p2 = second_stage_settlement(day, realized_reported_cost, expected_load_cost_i, event, schedule);
        Self {
            p1,
            p2,
            penalty_applied: event,
            penalty: if event { schedule.penalty(day) } else { 0.0 },
            total: p1 + p2,
            realized_reported_cost,
        }
    }

    /// `total - (W*_{-i} - W* + realized - penalty)`: zero up to rounding,
    /// since the expected-cost terms of `p1` and `p2` cancel.
    pub fn identity_residual(&self, w_minus_i: f64, w_star: f64) -> f64 {
        self.total - (w_minus_i - w_star + self.realized_reported_cost - self.penalty)
    }
}

/// `total - true curtailment cost`.
pub fn day_utility(payment: &PaymentRecord, true_curtailment_cost: f64) -> f64 {
    payment.total - true_curtailment_cost
}

/// Reduction charged to the load's true cost function when it was told to
/// curtail `pi` against a reported baseline.
pub fn true_reduction(convention: UtilityConvention, pi: f64, reported_baseline: f64, true_baseline: f64) -> f64 {
    match convention {
        // consumption is reported_baseline - pi; reduction below the true baseline
        UtilityConvention::PhysicalReduction => pi - (reported_baseline - true_baseline),
        UtilityConvention::Literal => pi,
    }
}

/// Horizon mean and the minimum running mean over the tail of the horizon
/// (a finite-horizon stand-in for `liminf`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LongRunAverage {
    pub mean: f64,
    pub tail_min: f64,
}

/// First day of the tail window for horizon `days`.
pub fn tail_start(days: u64, tail_fraction: f64) -> u64 {
    let len = ((tail_fraction * days as f64).ceil() as u64).clamp(1, days.max(1));
    days - len + 1
}

fn check_fraction(tail_fraction: f64) -> Result<()> {
    if tail_fraction > 0.0 && tail_fraction <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "tail fraction must lie in (0, 1] (got {tail_fraction})"
        )))
    }
}

pub fn long_run_average(stream: &[f64], tail_fraction: f64) -> Result<LongRunAverage> {
    check_fraction(tail_fraction)?;
    if stream.is_empty() {
        return Err(Error::InvalidArgument("empty utility stream".into()));
    }
    let mut acc = RunningAverage::new(stream.len() as u64, tail_fraction)?;
    for &u in stream {
        acc.push(u);
    }
    Ok(acc.finish())
}

/// Streaming version of [`long_run_average`] for a known horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningAverage {
    sum: f64,
    count: u64,
    tail_start: u64,
    tail_min: f64,
}

impl RunningAverage {
    pub fn new(horizon: u64, tail_fraction: f64) -> Result<Self> {
        check_fraction(tail_fraction)?;
        Ok(Self {
            sum: 0.0,
            count: 0,
            tail_start: tail_start(horizon, tail_fraction),
            tail_min: f64::INFINITY,
        })
    }

    pub fn push(&mut self, x: f64) {
        self.sum += x;
        self.count += 1;
        if self.count >= self.tail_start {
            self.tail_min = self.tail_min.min(self.mean());
        }
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn finish(&self) -> LongRunAverage {
        LongRunAverage {
            mean: self.mean(),
            tail_min: if self.tail_min.is_finite() {
                self.tail_min
            } else {
                self.mean()
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_stage_examples() {
        let p = first_stage_payment(845.0 / 6.0, 80.0, 50.0);
        assert!((p - 110.833_333_333).abs() < 1e-6);
        let p = first_stage_payment(845.0 / 11.0, 80.0, 25.0);
        assert!((p - 21.818_181_818).abs() < 1e-6);
        assert_eq!(first_stage_payment(7.5, 7.5, 0.0), 0.0);
    }

    #[test]
    fn second_stage_examples() {
        let s = PenaltySchedule::default();
        assert_eq!(second_stage_settlement(4, 50.0, 50.0, false, &s), 0.0);
        assert_eq!(second_stage_settlement(4, 30.0, 50.0, true, &s), -28.0);
    }

    #[test]
    fn truthful_deterministic_utility() {
        let s = PenaltySchedule::default();
        let p1 = first_stage_payment(845.0 / 6.0, 80.0, 50.0);
        let rec = PaymentRecord::settle(3, p1, 50.0, 50.0, false, &s);
        assert_eq!(rec.p2, 0.0);
        assert_eq!(rec.total, rec.p1 + rec.p2);
        let u = day_utility(&rec, 50.0);
        assert!((u - (845.0 / 6.0 - 80.0)).abs() < 1e-9);
        assert!(rec.identity_residual(845.0 / 6.0, 80.0).abs() < 1e-12);
        assert_eq!(
            day_utility(&PaymentRecord::settle(1, 0.0, 0.0, 0.0, false, &s), 0.0),
            0.0
        );
    }

    #[test]
    fn penalized_day_composes() {
        let s = PenaltySchedule::default();
        let p1 = 110.8333;
        let rec = PaymentRecord::settle(9, p1, 30.0, 50.0, true, &s);
        assert_eq!(rec.penalty, 27.0);
        assert!((rec.total - (p1 - 27.0 - 20.0)).abs() < 1e-12);
        assert!((day_utility(&rec, 30.0) - (p1 - 27.0 - 50.0)).abs() < 1e-12);
    }

    #[test]
    fn physical_reduction_accounts_for_inflation() {
        // told to curtail 4 against a baseline inflated by 1: actual cut is 3
        assert_eq!(true_reduction(UtilityConvention::PhysicalReduction, 4.0, 4.0, 3.0), 3.0);
        assert_eq!(true_reduction(UtilityConvention::Literal, 4.0, 4.0, 3.0), 4.0);
        assert_eq!(true_reduction(UtilityConvention::PhysicalReduction, 4.0, 3.0, 3.0), 4.0);
    }

    #[test]
    fn long_run_examples() {
        let c = long_run_average(&vec![60.8333; 1000], 0.5).unwrap();
        assert!((c.mean - 60.8333).abs() < 1e-9);
        assert!((c.tail_min - c.mean).abs() < 1e-9);
        let alt: Vec<f64> = (0..1000).map(|k| if k % 2 == 0 { 0.0 } else { 2.0 }).collect();
        assert_eq!(long_run_average(&alt, 0.5).unwrap().mean, 1.0);
        assert!(long_run_average(&[], 0.5).is_err());
        assert!(long_run_average(&[1.0], 0.0).is_err());
        assert!(long_run_average(&[1.0], 1.5).is_err());
    }

    #[test]
    fn single_shock_is_a_bounded_perturbation() {
        let s = PenaltySchedule::default();
        let n = 100_000;
        let mut stream = vec![1.0; n];
        stream[99] -= s.penalty(100);
        let a = long_run_average(&stream, 0.5).unwrap();
        assert!((a.mean - 1.0).abs() <= s.penalty(100) / n as f64 + 1e-12);
    }

    #[test]
    fn tail_min_skips_early_transients() {
        let mut stream = vec![-100.0, -100.0];
        stream.extend(std::iter::repeat(5.0).take(98));
        let a = long_run_average(&stream, 0.5).unwrap();
        // running mean on day 51 is (5*49 - 200) / 51
        assert!((a.tail_min - (5.0 * 49.0 - 200.0) / 51.0).abs() < 1e-12);
        assert!(a.tail_min < a.mean);
        assert_eq!(tail_start(100, 0.5), 51);
        assert_eq!(tail_start(7, 1.0), 1);
    }
}
