//! Verification suites: named checks on built-in instances, each with the
//! measured discrepancy and the tolerance it was held to.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::games::{deterministic_game, incentive_candidates, penalty_game, penalty_game_misreport, small_game};
use super::{brute_force_real_time, enumerate_deviations, exact_expectation, grid_tolerance, recount_statistics};
use super::{search_ranges, DeviationReport};
use crate::dispatch::{expected_social_cost, solve_day_ahead, solve_real_time, vcg_inputs};
use crate::engine::{run, MemorySink, NullSink, RunOptions};
use crate::error::{Error, Result};
use crate::mechanism::DeviationTracker;
use crate::model::{
    CostModel, CurtailmentBounds, ExpectationMethod, GeneratorCost, JointTypeModel, LoadType, NetDemandModel,
    PenaltySchedule, System, TypeDistribution, TypeIdx, TypeSpace,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Dispatch,
    Mechanism,
    Incentives,
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Dispatch => "dispatch",
            Suite::Mechanism => "mechanism",
            Suite::Incentives => "incentives",
        })
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dispatch" => Ok(Suite::Dispatch),
            "mechanism" => Ok(Suite::Mechanism),
            "incentives" => Ok(Suite::Incentives),
            other => Err(Error::InvalidArgument(format!(
                "unknown suite `{other}` (expected dispatch, mechanism or incentives)"
            ))),
        }
    }
}

/// One assertion: passed iff `measured <= tolerance` unless stated otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
}

impl Check {
    fn within(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: measured <= tolerance,
            measured,
            tolerance,
        }
    }

    fn close(name: impl Into<String>, got: f64, want: f64, tolerance: f64) -> Self {
        Self::within(name, (got - want).abs(), tolerance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deviations: Option<DeviationReport>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    /// Random dispatch instances.
    pub instances: usize,
    pub seed: u64,
    /// Horizon of the incentive runs.
    pub horizon: u64,
    /// Seeds of the incentive runs.
    pub seeds: Vec<u64>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            instances: 200,
            seed: 2024,
            horizon: 20_000,
            seeds: (1..=20).collect(),
        }
    }
}

pub fn run_suite(suite: Suite, options: &VerifyOptions) -> Result<VerifyReport> {
    let (checks, deviations) = match suite {
        Suite::Dispatch => (dispatch_checks(options)?, None),
        Suite::Mechanism => (mechanism_checks()?, None),
        Suite::Incentives => {
            let (c, d) = incentive_checks(options)?;
            (c, Some(d))
        }
    };
    Ok(VerifyReport {
        suite,
        checks,
        deviations,
    })
}

/// A random real-time instance with at most 3 loads and 3 types.
#[derive(Debug, Clone)]
pub struct DispatchInstance {
    pub system: System,
    pub z: f64,
    pub g: f64,
    pub reported: Vec<TypeIdx>,
}

pub fn random_instance<R: Rng + ?Sized>(rng: &mut R) -> DispatchInstance {
    let k = rng.gen_range(1..=3usize);
    let d_max = rng.gen_range(0..=3u32);
    let types = (0..k)
        .map(|j| LoadType::new(format!("t{j}"), rng.gen_range(0..=d_max), rng.gen_range(1.0..5.0)))
        .collect();
    let bounds = if rng.gen_bool(0.5) {
        CurtailmentBounds::Box
    } else {
        CurtailmentBounds::Unconstrained
    };
    let n = rng.gen_range(1..=3usize);
    DispatchInstance {
        system: System {
            type_space: TypeSpace::new(d_max, types),
            net_demand: NetDemandModel::constant(0.0),
            costs: CostModel::quadratic(rng.gen_range(0.2..2.0)),
            bounds,
        },
        z: rng.gen_range(-5.0..10.0),
        g: rng.gen_range(0.0..2.0),
        reported: (0..n).map(|_| TypeIdx(rng.gen_range(0..k) as u16)).collect(),
    }
}

/// Grid step of the form `1 / m` keeping the brute-force work near
/// `budget` cells. Integer box bounds then lie on the grid.
pub fn instance_step(inst: &DispatchInstance, budget: f64) -> f64 {
    let space = &inst.system.type_space;
    let s = inst.z - inst.g + inst.reported.iter().map(|&t| space.baseline(t)).sum::<f64>();
    let span: f64 = search_ranges(&inst.system, s, &inst.reported)
        .iter()
        .map(|(lo, hi)| hi - lo)
        .sum();
    let n = inst.reported.len() as f64;
    let step = (span * (n / budget).sqrt()).max(0.005);
    1.0 / (1.0 / step).ceil().max(1.0)
}

/// Solver cost minus grid cost must lie in `[-tol, 1e-9 (1 + |grid|)]`;
/// returns the distance and the tolerance.
pub fn compare_with_grid(inst: &DispatchInstance, step: f64) -> Result<(f64, f64)> {
    let exact = solve_real_time(&inst.system, inst.z, inst.g, &inst.reported)?;
    let grid = brute_force_real_time(&inst.system, inst.z, inst.g, &inst.reported, step)?;
    let tol = grid_tolerance(&inst.system, inst.reported.len(), step);
    let diff = grid.social_cost - exact.social_cost;
    if diff < -1e-9 * (1.0 + grid.social_cost.abs()) {
        // the solver lost to a grid point
        return Ok((diff.abs() + tol, tol));
    }
    Ok((diff.abs(), tol))
}

fn dispatch_checks(options: &VerifyOptions) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    for k in 0..options.instances {
        let inst = random_instance(&mut rng);
        let step = instance_step(&inst, 2e7);
        let (measured, tol) = compare_with_grid(&inst, step)?;
        checks.push(Check::within(
            format!("random instance {k} (grid step {step:.3})"),
            measured,
            tol,
        ));
    }

    let det = deterministic_game(1);
    let mut sys = det.system();
    let both = [TypeIdx(0), TypeIdx(1)];
    let sol = solve_real_time(&sys, 10.0, 0.0, &both)?;
    checks.push(Check::close("deterministic pi_1", sol.curtailments[0], 10.0, 1e-6));
    checks.push(Check::close("deterministic pi_2", sol.curtailments[1], 5.0, 1e-6));
    checks.push(Check::close("deterministic cost", sol.social_cost, 80.0, 1e-6));
    sys.bounds = CurtailmentBounds::Box;
    let sol = solve_real_time(&sys, 10.0, 0.0, &both)?;
    checks.push(Check::close("box-bounded cost", sol.social_cost, 513.5, 1e-6));
    sys.bounds = CurtailmentBounds::Unconstrained;
    sys.costs = sys.costs.with_generator(GeneratorCost::Quadratic { a: 1.0 });
    let d = solve_day_ahead(&det.true_model(), &sys, &ExpectationMethod::Enumerate)?;
    checks.push(Check::close("generator g*", d.g_star, 80.0 / 21.0, 1e-6));
    checks.push(Check::close("generator W*", d.w_star, 1280.0 / 21.0, 1e-6));

    let game = small_game(1);
    let sys = game.system();
    let model = game.true_model();
    for g in [0.0, 1.5, 4.0] {
        let exact = exact_expectation(g, &model, &sys)?;
        let enumerated = expected_social_cost(g, &model, &sys, &ExpectationMethod::Enumerate)?.value;
        checks.push(Check::within(
            format!("small game expectation at g = {g}"),
            (exact - enumerated).abs(),
            1e-9 * (1.0 + exact.abs()),
        ));
    }
    Ok(checks)
}

fn mechanism_checks() -> Result<Vec<Check>> {
    let mut checks = Vec::new();

    let det = deterministic_game(50);
    let vcg = vcg_inputs(&det.true_model(), &det.system(), &ExpectationMethod::Enumerate)?;
    let w = vcg.decision.w_star;
    checks.push(Check::close("W*_{-1}", vcg.w_minus[0], 845.0 / 6.0, 1e-6));
    checks.push(Check::close("W*_{-2}", vcg.w_minus[1], 845.0 / 11.0, 1e-6));
    checks.push(Check::close(
        "W*_{-2} - W* (explicit baseline)",
        vcg.w_minus[1] - w,
        -35.0 / 11.0,
        1e-6,
    ));

    let mut sink = MemorySink::default();
    let options = RunOptions {
        audit_every: 1,
        ..RunOptions::default()
    };
    let res = run(&det, &det.strategies()?, &mut sink, options)?;
    checks.push(Check::close(
        "p1 of load 1",
        res.first_stage[0],
        110.0 + 5.0 / 6.0,
        1e-6,
    ));
    checks.push(Check::close(
        "p1 of load 2",
        res.first_stage[1],
        21.0 + 9.0 / 11.0,
        1e-6,
    ));
    checks.push(Check::within(
        "payment identity on every day",
        res.max_identity_residual,
        1e-12,
    ));
    let drift = sink
        .records
        .iter()
        .flat_map(|r| r.payments.iter().zip(&res.first_stage).map(|(p, f)| (p.p1 - f).abs()))
        .fold(0.0, f64::max);
    checks.push(Check::within("p1 constant across days", drift, 0.0));
    let cost_err = sink
        .records
        .iter()
        .map(|r| (r.social_cost - 80.0).abs())
        .fold(0.0, f64::max);
    checks.push(Check::within(
        "deterministic social cost 80 on every day",
        cost_err,
        1e-9,
    ));

    let schedule = PenaltySchedule::default();
    checks.push(Check::close("r(4)", schedule.threshold(4), 1.317, 1e-3));
    checks.push(Check::close("J_p(4)", schedule.penalty(4), 8.0, 1e-12));

    // tracker against a direct recount
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let model = JointTypeModel::new(vec![TypeDistribution::new(vec![0.5, 0.3, 0.2]).expect("simplex"); 3]);
    let mut tracker = DeviationTracker::new(&model);
    let mut log = Vec::new();
    let mut worst: f64 = 0.0;
    for day in 1..=600 {
        let profile: Vec<TypeIdx> = (0..3).map(|_| TypeIdx(rng.gen_range(0..3))).collect();
        tracker.update(&profile)?;
        log.push(profile);
        if day % 50 == 0 {
            for i in 0..3 {
                let (f, h) = recount_statistics(&log, &model, i);
                worst = worst
                    .max((f - tracker.sup_f(i)).abs())
                    .max((h - tracker.sup_h(i)).abs());
            }
        }
    }
    checks.push(Check::within("tracker statistics match a recount", worst, 1e-12));

    // truthful play is rarely penalized
    let game = small_game(20_000);
    let mut fraction: f64 = 0.0;
    for seed in 1..=3 {
        let mut cfg = game.clone();
        cfg.seed = seed;
        let res = run(&cfg, &cfg.strategies()?, &mut NullSink, RunOptions::default())?;
        for i in 0..res.n_loads() {
            fraction = fraction.max(res.tail_penalty_fraction(i));
        }
    }
    checks.push(Check::within("truthful tail penalty-day fraction", fraction, 0.005));

    // a TV-0.4 misreport is caught early
    let game = penalty_game(200);
    let mut strategies = game.strategies()?;
    strategies[0] = crate::agents::make_strategy(&penalty_game_misreport(), &game.type_space)?;
    let res = run(&game, &strategies, &mut NullSink, RunOptions::default())?;
    let first = res.first_penalty_day[0].map_or(f64::INFINITY, |d| d as f64);
    checks.push(Check::within("first penalty day of a TV-0.4 misreport", first, 50.0));
    Ok(checks)
}

fn incentive_checks(options: &VerifyOptions) -> Result<(Vec<Check>, DeviationReport)> {
    let report = enumerate_deviations(&small_game(1), &incentive_candidates(), options.horizon, &options.seeds)?;
    let mut checks = Vec::new();
    for d in &report.deviations {
        // worst-seed shortfall of truthful play beyond the allowed slack
        let shortfall = d
            .seeds
            .iter()
            .map(|s| {
                let slack = if d.persistent { 0.0 } else { 2.0 * s.gap_std_error };
                -(s.gap + slack)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        checks.push(Check {
            name: format!("truthful dominates {}", d.strategy),
            passed: d.truthful_dominates,
            measured: shortfall,
            tolerance: 0.0,
        });
    }
    Ok((checks, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in [Suite::Dispatch, Suite::Mechanism, Suite::Incentives] {
            assert_eq!(s.to_string().parse::<Suite>().unwrap(), s);
        }
        assert!("bogus".parse::<Suite>().is_err());
    }

    #[test]
    fn dispatch_suite_small() {
        let rep = run_suite(
            Suite::Dispatch,
            &VerifyOptions {
                instances: 20,
                ..VerifyOptions::default()
            },
        )
        .unwrap();
        assert!(rep.passed(), "{:?}", rep.first_failure());
    }

    #[test]
    fn mechanism_suite() {
        let rep = run_suite(Suite::Mechanism, &VerifyOptions::default()).unwrap();
        assert!(rep.passed(), "{:?}", rep.first_failure());
    }
}
