//! The repeated two-stage game: one day-ahead solve, then a sequential loop
//! of sampling, real-time reports, dispatch, tracking and settlement.

mod ledger;

pub use ledger::{read_ledger, CsvLedger, LedgerRow, LedgerSink, MemorySink, NullSink, LEDGER_HEADER};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::Strategy;
use crate::dispatch::{solve_real_time, vcg_inputs, VcgInputs};
use crate::error::{Error, Result};
use crate::mechanism::{
    day_utility, first_stage_payment, true_reduction, DeviationTracker, LongRunAverage, PaymentRecord, RunningAverage,
};
use crate::model::distribution::check_simplex;
use crate::model::{DaySampler, ExpectationMethod, ExperimentConfig, JointTypeModel, TypeIdx, TypeSpace};

/// RNG stream of nature (net demand and true types).
const NATURE_STREAM: u64 = 0;
/// RNG stream handed to the real-time policies.
const AGENT_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Share of the horizon over which the tail-min running average is taken.
    pub tail_fraction: f64,
    /// Keep every [`DayRecord`] in the result.
    pub keep_records: bool,
    /// Check compliance and the payment identity every this many days
    /// (0 disables the checks).
    pub audit_every: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            tail_fraction: 0.5,
            keep_records: false,
            audit_every: 97,
        }
    }
}

/// Everything that happened on one day.
#[derive(Debug, Clone, PartialEq)]
pub struct DayRecord {
    pub day: u64,
    pub z: f64,
    pub true_types: Vec<TypeIdx>,
    pub reported_types: Vec<TypeIdx>,
    pub curtailments: Vec<f64>,
    pub reserve: f64,
    /// `y_i = reported baseline - curtailment`.
    pub consumptions: Vec<f64>,
    pub payments: Vec<PaymentRecord>,
    pub utilities: Vec<f64>,
    pub generator_cost: f64,
    pub reserve_cost: f64,
    /// Load costs at the true reductions with the true types.
    pub true_load_costs: Vec<f64>,
    /// `c_g(g*) + c_r(g_r) + sum of true load costs`.
    pub social_cost: f64,
}

/// True iff every load consumed exactly its reported baseline minus its
/// dispatched curtailment.
pub fn audit_compliance(record: &DayRecord, space: &TypeSpace) -> bool {
    record.reported_types.len() == record.consumptions.len()
        && record
            .reported_types
            .iter()
            .zip(&record.curtailments)
            .zip(&record.consumptions)
            .all(|((&t, &pi), &y)| y == space.baseline(t) - pi)
}

/// Accumulates a mean, its standard error and the tail-min running mean.
#[derive(Debug, Clone, PartialEq)]
struct Moments {
    avg: RunningAverage,
    sum_sq: f64,
}

impl Moments {
    fn new(days: u64, tail_fraction: f64) -> Result<Self> {
        Ok(Self {
            avg: RunningAverage::new(days, tail_fraction)?,
            sum_sq: 0.0,
        })
    }

    fn push(&mut self, x: f64) {
        self.avg.push(x);
        self.sum_sq += x * x;
    }

    fn std_error(&self) -> f64 {
        let n = self.avg.count() as f64;
        if n < 2.0 {
            return 0.0;
        }
        let mean = self.avg.mean();
        let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }

    fn stat(&self) -> Stat {
        let LongRunAverage { mean, tail_min } = self.avg.finish();
        Stat {
            mean,
            tail_min,
            std_error: self.std_error(),
        }
    }
}

/// Mean, tail-min running mean and standard error of a daily series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Stat {
    pub mean: f64,
    pub tail_min: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub days: u64,
    pub tail_fraction: f64,
    pub vcg: VcgInputs,
    /// First-stage payment of each load (constant over the horizon).
    pub first_stage: Vec<f64>,
    pub utility: Vec<Stat>,
    pub social_cost: Stat,
    pub penalty_days: Vec<u64>,
    /// Penalized days inside the tail window.
    pub tail_penalty_days: Vec<u64>,
    pub first_penalty_day: Vec<Option<u64>>,
    /// Largest payment identity residual over audited days, relative to
    /// `1 + |W*_{-i}| + |W*| + |E[c_i]| + |realized cost| + penalty`.
    pub max_identity_residual: f64,
    pub audited_days: u64,
    pub tracker: DeviationTracker,
    /// Present when [`RunOptions::keep_records`] is set.
    pub records: Vec<DayRecord>,
    /// Labels of the strategies played, one per load.
    pub strategy_labels: Vec<String>,
}

impl SimulationResult {
    pub fn n_loads(&self) -> usize {
        self.first_stage.len()
    }

    pub fn w_star(&self) -> f64 {
        self.vcg.decision.w_star
    }

    /// Fraction of tail-window days on which load `i` was penalized.
    pub fn tail_penalty_fraction(&self, i: usize) -> f64 {
        let start = crate::mechanism::tail_start(self.days, self.tail_fraction);
        self.tail_penalty_days[i] as f64 / (self.days - start + 1) as f64
    }
}

fn resolved_method(config: &ExperimentConfig) -> ExpectationMethod {
    match config.expectation {
        ExpectationMethod::MonteCarlo { samples, .. } => ExpectationMethod::MonteCarlo {
            samples,
            seed: Some(config.expectation_seed()),
        },
        m => m,
    }
}

/// The day-ahead phase: reported distributions and the VCG inputs.
pub fn day_ahead(config: &ExperimentConfig, strategies: &[Strategy]) -> Result<(JointTypeModel, VcgInputs)> {
    let truth = config.true_model();
    if strategies.len() != truth.n_loads() {
        return Err(Error::InvalidArgument(format!(
            "{} strategies for {} loads",
            strategies.len(),
            truth.n_loads()
        )));
    }
    let k = config.type_space.len();
    let mut reported = Vec::with_capacity(strategies.len());
    for (s, theta) in strategies.iter().zip(truth.per_load()) {
        let r = s.report_distribution(theta);
        if r.len() != k {
            return Err(Error::Strategy(format!(
                "strategy {} reported {} probabilities for {k} types",
                s.label(),
                r.len()
            )));
        }
        check_simplex(r.probs()).map_err(Error::Strategy)?;
        reported.push(r);
    }
    let reported = JointTypeModel::new(reported);
    let vcg = vcg_inputs(&reported, &config.system(), &resolved_method(config))?;
    Ok((reported, vcg))
}

/// Runs the full horizon of `config` with one strategy per load, streaming
/// each day to `sink`.
pub fn run(
    config: &ExperimentConfig,
    strategies: &[Strategy],
    sink: &mut dyn LedgerSink,
    options: RunOptions,
) -> Result<SimulationResult> {
    config.validate()?;
    let days = config.days;
    let truth = config.true_model();
    let (reported_model, vcg) = day_ahead(config, strategies)?;
    let n = truth.n_loads();
    let system = config.system();
    let space = &system.type_space;
    let decision = &vcg.decision;
    let g_star = decision.g_star;

    let first_stage: Vec<f64> = (0..n)
        .map(|i| first_stage_payment(vcg.w_minus[i], decision.w_star, decision.expected_load_cost[i]))
        .collect();

    let mut policies: Vec<_> = strategies
        .iter()
        .zip(truth.per_load())
        .map(|(s, theta)| s.policy(theta))
        .collect();
    for p in &mut policies {
        p.start(g_star);
    }

    let sampler = DaySampler::new(&config.net_demand, &truth);
    let mut nature = ChaCha8Rng::seed_from_u64(config.seed);
    nature.set_stream(NATURE_STREAM);
    let mut agent_rng = ChaCha8Rng::seed_from_u64(config.seed);
    agent_rng.set_stream(AGENT_STREAM);

    let mut tracker = DeviationTracker::new(&reported_model);
    let mut utility = vec![Moments::new(days, options.tail_fraction)?; n];
    let mut social = Moments::new(days, options.tail_fraction)?;
    let tail_start = crate::mechanism::tail_start(days, options.tail_fraction);
    let mut penalty_days = vec![0u64; n];
    let mut tail_penalty_days = vec![0u64; n];
    let mut first_penalty_day = vec![None; n];
    let mut max_identity_residual: f64 = 0.0;
    let mut audited_days = 0;
    let mut records = Vec::new();

    let mut true_types = Vec::with_capacity(n);
    for day in 1..=days {
        let z = sampler.sample_into(&mut nature, &mut true_types);
        let reported: Vec<TypeIdx> = policies
            .iter_mut()
            .zip(&true_types)
            .map(|(p, &t)| p.report(day, t, &mut agent_rng))
            .collect();
        if let Some(t) = reported.iter().find(|t| t.get() >= space.len()) {
            return Err(Error::Strategy(format!(
                "reported type index {} outside the type space",
                t.0
            )));
        }
        let sol = solve_real_time(&system, z, g_star, &reported)?;
        tracker.update(&reported)?;

        let mut payments = Vec::with_capacity(n);
        let mut utilities = Vec::with_capacity(n);
        let mut true_load_costs = Vec::with_capacity(n);
        let mut consumptions = Vec::with_capacity(n);
        for i in 0..n {
            let event = tracker.penalty_event(i, &config.penalty);
            let pay = PaymentRecord::settle(
                day,
                first_stage[i],
                sol.load_costs[i],
                decision.expected_load_cost[i],
                event,
                &config.penalty,
            );
            let pi = sol.curtailments[i];
            let d_hat = space.baseline(reported[i]);
            let d = space.baseline(true_types[i]);
            let x = true_reduction(config.utility_convention, pi, d_hat, d);
            let true_cost = system.costs.load(space.get(true_types[i]), x)?;
            let u = day_utility(&pay, true_cost);
            if event {
                penalty_days[i] += 1;
                if day >= tail_start {
                    tail_penalty_days[i] += 1;
                }
                first_penalty_day[i].get_or_insert(day);
            }
            utility[i].push(u);
            policies[i].observe(pi);
            payments.push(pay);
            utilities.push(u);
            true_load_costs.push(true_cost);
            consumptions.push(d_hat - pi);
        }
        let social_cost = sol.generator_cost + sol.reserve_cost + true_load_costs.iter().sum::<f64>();
        social.push(social_cost);

        let record = DayRecord {
            day,
            z,
            true_types: true_types.clone(),
            reported_types: reported,
            curtailments: sol.curtailments,
            reserve: sol.reserve,
            consumptions,
            payments,
            utilities,
            generator_cost: sol.generator_cost,
            reserve_cost: sol.reserve_cost,
            true_load_costs,
            social_cost,
        };

        if options.audit_every > 0 && (day % options.audit_every == 0 || day == 1) {
            audited_days += 1;
            if !audit_compliance(&record, space) {
                return Err(Error::Integrity(format!("compliance check failed on day {day}")));
            }
            for (i, p) in record.payments.iter().enumerate() {
                let r = p.identity_residual(vcg.w_minus[i], decision.w_star);
                let scale = 1.0
                    + vcg.w_minus[i].abs()
                    + decision.w_star.abs()
                    + decision.expected_load_cost[i].abs()
                    + p.realized_reported_cost.abs()
                    + p.penalty;
                max_identity_residual = max_identity_residual.max(r.abs() / scale);
            }
        }

        sink.record(&record, space)?;
        if options.keep_records {
            records.push(record);
        }
    }
    sink.finish()?;

    Ok(SimulationResult {
        days,
        tail_fraction: options.tail_fraction,
        first_stage,
        utility: utility.iter().map(Moments::stat).collect(),
        social_cost: social.stat(),
        penalty_days,
        tail_penalty_days,
        first_penalty_day,
        max_identity_residual,
        audited_days,
        tracker,
        records,
        strategy_labels: strategies.iter().map(|s| s.label().to_string()).collect(),
        vcg,
    })
}

/// Per-load summary line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LoadSummary {
    pub load: usize,
    pub strategy: String,
    pub p1: f64,
    pub w_minus: f64,
    pub expected_load_cost: f64,
    pub utility: Stat,
    pub penalty_days: u64,
    pub tail_penalty_fraction: f64,
    pub first_penalty_day: Option<u64>,
}

/// Run metrics emitted as the summary document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Summary {
    pub days: u64,
    pub n_loads: usize,
    pub tail_fraction: f64,
    pub g_star: f64,
    pub w_star: f64,
    pub w_star_std_error: Option<f64>,
    pub social_cost: Stat,
    pub max_identity_residual: f64,
    pub loads: Vec<LoadSummary>,
}

/// Summary metrics of a completed run. The tail-min statistics are those
/// of the run's own tail window; `tail_fraction` must match it unless the
/// run kept its records.
pub fn summarize(result: &SimulationResult, tail_fraction: f64) -> Result<Summary> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "tail fraction must lie in (0, 1] (got {tail_fraction})"
        )));
    }
    let n = result.n_loads();
    let mut utility = result.utility.clone();
    let mut social_cost = result.social_cost;
    let mut tail_penalties = result.tail_penalty_days.clone();
    if tail_fraction != result.tail_fraction {
        if result.records.len() as u64 != result.days {
            return Err(Error::InvalidArgument(
                "a different tail fraction needs a run that kept its records".into(),
            ));
        }
        let start = crate::mechanism::tail_start(result.days, tail_fraction);
        let mut u = vec![Moments::new(result.days, tail_fraction)?; n];
        let mut s = Moments::new(result.days, tail_fraction)?;
        tail_penalties = vec![0; n];
        for r in &result.records {
            s.push(r.social_cost);
            for i in 0..n {
                u[i].push(r.utilities[i]);
                if r.payments[i].penalty_applied && r.day >= start {
                    tail_penalties[i] += 1;
                }
            }
        }
        utility = u.iter().map(Moments::stat).collect();
        social_cost = s.stat();
    }
    let tail_len = (result.days - crate::mechanism::tail_start(result.days, tail_fraction) + 1) as f64;
    let d = &result.vcg.decision;
    Ok(Summary {
        days: result.days,
        n_loads: n,
        tail_fraction,
        g_star: d.g_star,
        w_star: d.w_star,
        w_star_std_error: d.w_star_std_error,
        social_cost,
        max_identity_residual: result.max_identity_residual,
        loads: (0..n)
            .map(|i| LoadSummary {
                load: i,
                strategy: result.strategy_labels[i].clone(),
                p1: result.first_stage[i],
                w_minus: result.vcg.w_minus[i],
                expected_load_cost: d.expected_load_cost[i],
                utility: utility[i],
                penalty_days: result.penalty_days[i],
                tail_penalty_fraction: tail_penalties[i] as f64 / tail_len,
                first_penalty_day: result.first_penalty_day[i],
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{make_strategy, StrategySpec};
    use crate::model::{
        BaselineMode, CostModel, CurtailmentBounds, LoadGroupSpec, LoadType, NetDemandModel, PenaltySchedule,
        TypeDistribution, UtilityConvention,
    };

    pub(crate) fn deterministic_config(days: u64) -> ExperimentConfig {
        ExperimentConfig {
            seed: 1,
            days,
            mode: BaselineMode::ExplicitBaseline,
            curtailment_bounds: CurtailmentBounds::Unconstrained,
            type_space: TypeSpace::new(3, vec![LoadType::new("k1", 3, 1.0), LoadType::new("k2", 3, 2.0)]),
            loads: vec![
                LoadGroupSpec {
                    count: 1,
                    distribution: TypeDistribution::new(vec![1.0, 0.0]).unwrap(),
                    strategy: StrategySpec::Truthful,
                },
                LoadGroupSpec {
                    count: 1,
                    distribution: TypeDistribution::new(vec![0.0, 1.0]).unwrap(),
                    strategy: StrategySpec::Truthful,
                },
            ],
            net_demand: NetDemandModel::constant(10.0),
            costs: CostModel::quadratic(5.0),
            penalty: PenaltySchedule::default(),
            expectation: ExpectationMethod::Enumerate,
            utility_convention: UtilityConvention::PhysicalReduction,
        }
    }

    #[test]
    fn deterministic_truthful_run() {
        let cfg = deterministic_config(10);
        let mut sink = MemorySink::default();
        let res = run(&cfg, &cfg.strategies().unwrap(), &mut sink, RunOptions::default()).unwrap();
        assert_eq!(sink.records.len(), 10);
        for r in &sink.records {
            assert!((r.utilities[0] - (845.0 / 6.0 - 80.0)).abs() < 1e-9);
            assert!((r.utilities[1] - (845.0 / 11.0 - 80.0)).abs() < 1e-9);
            assert!((r.social_cost - 80.0).abs() < 1e-9);
            assert_eq!(r.payments[0].p1, res.first_stage[0]);
            assert!(audit_compliance(r, &cfg.type_space));
            assert!(r.payments.iter().all(|p| !p.penalty_applied));
        }
        assert_eq!(sink.records[0].curtailments, sink.records[9].curtailments);
    }

    #[test]
    fn tampered_record_fails_audit() {
        let cfg = deterministic_config(2);
        let mut sink = MemorySink::default();
        run(&cfg, &cfg.strategies().unwrap(), &mut sink, RunOptions::default()).unwrap();
        let mut r = sink.records[0].clone();
        r.consumptions[0] += 1.0;
        assert!(!audit_compliance(&r, &cfg.type_space));
    }

    #[test]
    fn strategy_count_must_match() {
        let cfg = deterministic_config(2);
        let one = vec![make_strategy(&StrategySpec::Truthful, &cfg.type_space).unwrap()];
        assert!(run(&cfg, &one, &mut NullSink, RunOptions::default()).is_err());
    }

    #[test]
    fn summarize_rejects_bad_fraction() {
        let cfg = deterministic_config(4);
        let res = run(&cfg, &cfg.strategies().unwrap(), &mut NullSink, RunOptions::default()).unwrap();
        assert!(summarize(&res, 0.0).is_err());
        assert!(summarize(&res, 1.5).is_err());
        assert!(summarize(&res, 0.25).is_err());
        let s = summarize(&res, 0.5).unwrap();
        assert!((s.loads[0].utility.tail_min - s.loads[0].utility.mean).abs() < 1e-9);
    }
}
