//! Exhaustive unilateral-deviation runs on a small game.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::agents::{make_strategy, Strategy, StrategySpec};
use crate::engine::{run, NullSink, RunOptions};
use crate::error::{Error, Result};
use crate::model::ExperimentConfig;

/// Shortest horizon over which penalties are given time to fire.
pub const MIN_HORIZON: u64 = 1000;

/// Tail window used for the tail-min utility.
const TAIL_FRACTION: f64 = 0.5;

/// Load 0's result in one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SeedOutcome {
    pub seed: u64,
    pub mean_utility: f64,
    pub tail_min_utility: f64,
    pub std_error: f64,
    pub penalty_day_fraction: f64,
    pub first_penalty_day: Option<u64>,
    /// Truthful mean utility minus this strategy's, same seed.
    pub gap: f64,
    /// `sqrt(se_truthful^2 + se^2)`.
    pub gap_std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DeviationEntry {
    pub strategy: String,
    pub spec: StrategySpec,
    /// False for intermittent strategies.
    pub persistent: bool,
    pub mean_utility: f64,
    pub tail_min_utility: f64,
    /// Standard error of the mean utility across seeds.
    pub std_error: f64,
    pub penalty_day_fraction: f64,
    pub mean_gap: f64,
    /// Persistent: truthful at least as good in every seed. Intermittent:
    /// truthful within two standard errors in every seed.
    pub truthful_dominates: bool,
    pub seeds: Vec<SeedOutcome>,
}

/// Unilateral deviations of load 0 against truthful opponents, each run on
/// the same per-seed sample path of net demand and true types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DeviationReport {
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub opponents: String,
    pub truthful: DeviationEntry,
    /// Sorted by strategy label.
    pub deviations: Vec<DeviationEntry>,
}

impl DeviationReport {
    pub fn all_dominated(&self) -> bool {
        self.deviations.iter().all(|d| d.truthful_dominates)
    }

    /// Deviations the truthful strategy failed to dominate.
    pub fn violations(&self) -> impl Iterator<Item = &DeviationEntry> {
        self.deviations.iter().filter(|d| !d.truthful_dominates)
    }

    /// One row per strategy per seed, truthful first.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "strategy",
            "persistent",
            "seed",
            "mean_utility",
            "tail_min_utility",
            "std_error",
            "penalty_day_fraction",
            "first_penalty_day",
            "gap",
            "gap_std_error",
        ])?;
        for e in std::iter::once(&self.truthful).chain(&self.deviations) {
            for s in &e.seeds {
                w.write_record([
                    e.strategy.clone(),
                    e.persistent.to_string(),
                    s.seed.to_string(),
                    s.mean_utility.to_string(),
                    s.tail_min_utility.to_string(),
                    s.std_error.to_string(),
                    s.penalty_day_fraction.to_string(),
                    s.first_penalty_day.map(|d| d.to_string()).unwrap_or_default(),
                    s.gap.to_string(),
                    s.gap_std_error.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn run_seed(game: &ExperimentConfig, strategies: &[Strategy], seed: u64) -> Result<SeedOutcome> {
    let mut cfg = game.clone();
    cfg.seed = seed;
    let options = RunOptions {
        tail_fraction: TAIL_FRACTION,
        keep_records: false,
        audit_every: 97,
    };
    let res = run(&cfg, strategies, &mut NullSink, options)?;
    Ok(SeedOutcome {
        seed,
        mean_utility: res.utility[0].mean,
        tail_min_utility: res.utility[0].tail_min,
        std_error: res.utility[0].std_error,
        penalty_day_fraction: res.penalty_days[0] as f64 / res.days as f64,
        first_penalty_day: res.first_penalty_day[0],
        gap: 0.0,
        gap_std_error: 0.0,
    })
}

fn entry(spec: &StrategySpec, mut seeds: Vec<SeedOutcome>, truthful: Option<&[SeedOutcome]>) -> DeviationEntry {
    let persistent = !matches!(spec, StrategySpec::Intermittent { .. });
    let mut dominates = true;
    if let Some(t) = truthful {
        for (s, t) in seeds.iter_mut().zip(t) {
            s.gap = t.mean_utility - s.mean_utility;
            s.gap_std_error = t.std_error.hypot(s.std_error);
            let slack = if persistent { 0.0 } else { 2.0 * s.gap_std_error };
            dominates &= s.gap >= -slack;
        }
    }
    let k = seeds.len() as f64;
    let avg = |f: fn(&SeedOutcome) -> f64| seeds.iter().map(f).sum::<f64>() / k;
    let mean = avg(|s| s.mean_utility);
    let var = if k > 1.0 {
        seeds.iter().map(|s| (s.mean_utility - mean).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    DeviationEntry {
        strategy: spec.label(),
        spec: spec.clone(),
        persistent,
        mean_utility: mean,
        tail_min_utility: avg(|s| s.tail_min_utility),
        std_error: (var / k).sqrt(),
        penalty_day_fraction: avg(|s| s.penalty_day_fraction),
        mean_gap: avg(|s| s.gap),
        truthful_dominates: dominates,
        seeds,
    }
}

/// Plays every candidate as load 0 against truthful opponents over
/// `horizon` days for each seed. Truthful play is always included once as
/// the anchor; duplicate candidates are dropped.
pub fn enumerate_deviations(
    game: &ExperimentConfig,
    candidates: &[StrategySpec],
    horizon: u64,
    seeds: &[u64],
) -> Result<DeviationReport> {
    if horizon < MIN_HORIZON {
        return Err(Error::InvalidArgument(format!(
            "horizon {horizon} is too short for penalties to stabilize (minimum {MIN_HORIZON})"
        )));
    }
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("at least one seed is required".into()));
    }
    let n = game.n_loads();
    let k = game.type_space.len();
    if n > 3 || k > 3 {
        return Err(Error::InvalidArgument(format!(
            "deviation enumeration needs n <= 3 and at most 3 types (got n = {n}, {k} types)"
        )));
    }
    let mut game = game.clone();
    game.days = horizon;
    for g in &mut game.loads {
        g.strategy = StrategySpec::Truthful;
    }
    game.validate()?;
    let theta = game.true_model().load(0).clone();

    let mut specs: Vec<StrategySpec> = Vec::new();
    for c in candidates {
        if !specs.contains(c) && *c != StrategySpec::Truthful {
            c.validate(&game.type_space, &theta)
                .map_err(|e| Error::Strategy(format!("{}: {e}", c.label())))?;
            specs.push(c.clone());
        }
    }
    specs.sort_by_key(StrategySpec::label);

    let mut profile = game.strategies()?;
    let play = |profile: &[Strategy]| -> Result<Vec<SeedOutcome>> {
        seeds.iter().map(|&s| run_seed(&game, profile, s)).collect()
    };
    let truthful = play(&profile)?;
    let mut deviations = Vec::with_capacity(specs.len());
    for spec in &specs {
        profile[0] = make_strategy(spec, &game.type_space)?;
        deviations.push(entry(spec, play(&profile)?, Some(&truthful)));
    }
    let truthful_entry = entry(&StrategySpec::Truthful, truthful.clone(), Some(&truthful));
    Ok(DeviationReport {
        horizon,
        seeds: seeds.to_vec(),
        opponents: "truthful".into(),
        truthful: truthful_entry,
        deviations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::games::small_game;

    #[test]
    fn short_horizon_rejected() {
        let err = enumerate_deviations(&small_game(1), &[], 999, &[1]).unwrap_err();
        assert!(err.to_string().contains("too short"));
    }

    #[test]
    fn truthful_vs_truthful_has_zero_gap() {
        let rep = enumerate_deviations(&small_game(1), &[StrategySpec::Truthful], 1000, &[1, 2]).unwrap();
        assert!(rep.deviations.is_empty());
        assert!(rep.truthful.seeds.iter().all(|s| s.gap == 0.0));
    }

    #[test]
    fn order_does_not_matter() {
        let a = StrategySpec::type_swap("a", "b");
        let b = StrategySpec::dist_misreport(vec![0.8, 0.1, 0.1]).unwrap();
        let r1 = enumerate_deviations(&small_game(1), &[a.clone(), b.clone()], 1000, &[3]).unwrap();
        let r2 = enumerate_deviations(&small_game(1), &[b, StrategySpec::Truthful, a], 1000, &[3]).unwrap();
        assert_eq!(r1, r2);
    }
}
