//! The posted-price benchmark: the operator announces one per-unit rebate
//! `p`, every load curtails its best response, and the reserve covers the
//! rest.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dispatch::inner_cost;
use crate::error::{Error, Result};
use crate::model::{BaselineMode, CostModel, DaySampler, ExperimentConfig, LoadCostFamily, LoadType, System, TypeIdx};

/// Number of points of the default rebate grid.
pub const DEFAULT_GRID_POINTS: usize = 50;

/// `argmax_x p x - c(x, ty)`; `p / kappa` for quadratic costs, the first
/// maximizer on the grid for tabulated costs.
pub fn best_response(p: f64, ty: &LoadType, costs: &CostModel) -> Result<f64> {
    match &costs.load {
        LoadCostFamily::Quadratic => {
            if ty.kappa.is_nan() || ty.kappa <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "unbounded best response: kappa {} for `{}`",
                    ty.kappa, ty.id
                )));
            }
            Ok(p / ty.kappa)
        }
        LoadCostFamily::Tabulated { .. } => {
            let (lo, hi) = costs.load_grid().expect("tabulated family has a grid");
            let mut best = (f64::NEG_INFINITY, 0.0);
            for k in lo..=hi {
                let x = k as f64;
                let v = p * x - costs.load(ty, x)?;
                if v > best.0 {
                    best = (v, x);
                }
            }
            Ok(best.1)
        }
    }
}

/// `c_r(z - sum x*_i) + sum c_i(x*_i, type_i)` under rebate `p`.
pub fn run_posted_day(p: f64, z: f64, types: &[TypeIdx], system: &System) -> Result<f64> {
    let mut counts = vec![0u32; system.type_space.len()];
    for t in types {
        counts[t.get()] += 1;
    }
    posted_cost_counts(p, z, &counts, system)
}

fn posted_cost_counts(p: f64, z: f64, counts: &[u32], system: &System) -> Result<f64> {
    let mut total = 0.0;
    let mut loads = 0.0;
    for (ty, &c) in system.type_space.types.iter().zip(counts) {
        if c == 0 {
            continue;
        }
        let x = best_response(p, ty, &system.costs)?;
        total += c as f64 * x;
        loads += c as f64 * system.costs.load(ty, x)?;
    }
    Ok(system.costs.reserve(z - total) + loads)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PostedPriceResult {
    pub rebate: f64,
    pub per_day_social_cost: Vec<f64>,
    pub average_social_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepResult {
    pub points: Vec<PostedPriceResult>,
    /// Optimal real-time dispatch cost on each day of the shared path.
    pub optimal_per_day: Vec<f64>,
    pub optimal_average: f64,
}

impl SweepResult {
    /// The grid point with the least average cost.
    pub fn minimum(&self) -> Option<&PostedPriceResult> {
        self.points
            .iter()
            .min_by(|a, b| a.average_social_cost.total_cmp(&b.average_social_cost))
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Posted-price average cost for every rebate in `grid`, plus the optimal
/// dispatch average, all on one `(z, types)` path drawn from `seed`.
/// Requires net-demand mode; the generator is not scheduled.
pub fn sweep(grid: &[f64], config: &ExperimentConfig, seed: u64) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty rebate grid".into()));
    }
    if let Some(p) = grid.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(Error::InvalidArgument(format!("rebate {p} must be finite and >= 0")));
    }
    if config.mode != BaselineMode::NetDemand {
        return Err(Error::InvalidArgument(
            "the posted-price benchmark needs a net-demand configuration".into(),
        ));
    }
    let system = config.system();
    let k = system.type_space.len();
    let sampler = DaySampler::from_config(config);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);

    let mut path = Vec::with_capacity(config.days as usize);
    let mut types = Vec::new();
    for _ in 0..config.days {
        let z = sampler.sample_into(&mut rng, &mut types);
        let mut counts = vec![0u32; k];
        for t in &types {
            counts[t.get()] += 1;
        }
        path.push((z, counts));
    }

    let mut scratch = vec![0.0; k];
    let optimal_per_day = path
        .iter()
        .map(|(z, counts)| Ok(system.costs.generator(0.0) + inner_cost(&system, *z, counts, &mut scratch)?))
        .collect::<Result<Vec<f64>>>()?;
    let points = grid
        .iter()
        .map(|&p| {
            let per_day = path
                .iter()
                .map(|(z, counts)| Ok(system.costs.generator(0.0) + posted_cost_counts(p, *z, counts, &system)?))
                .collect::<Result<Vec<f64>>>()?;
            Ok(PostedPriceResult {
                rebate: p,
                average_social_cost: mean(&per_day),
                per_day_social_cost: per_day,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        points,
        optimal_average: mean(&optimal_per_day),
        optimal_per_day,
    })
}

/// The rebate minimizing expected posted-price cost under quadratic costs:
/// with `S = sum 1/kappa_i`, `p = 2a E[z] E[S] / (2a E[S^2] + E[S])`.
pub fn analytic_rebate(config: &ExperimentConfig) -> Result<f64> {
    let a = match (&config.costs.load, config.costs.reserve_quadratic()) {
        (LoadCostFamily::Quadratic, Some(a)) => a,
        _ => {
            return Err(Error::UnsupportedFamily(
                "the analytic rebate needs quadratic reserve and load costs".into(),
            ))
        }
    };
    let mut mean_s = 0.0;
    let mut var_s = 0.0;
    for theta in config.true_model().per_load() {
        let m1: f64 = theta
            .probs()
            .iter()
            .zip(&config.type_space.types)
            .map(|(p, t)| p / t.kappa)
            .sum();
        let m2: f64 = theta
            .probs()
            .iter()
            .zip(&config.type_space.types)
            .map(|(p, t)| p / (t.kappa * t.kappa))
            .sum();
        mean_s += m1;
        var_s += m2 - m1 * m1;
    }
    let second = var_s + mean_s * mean_s;
    let denom = 2.0 * a * second + mean_s;
    if denom <= 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * a * config.net_demand.mean() * mean_s / denom)
}

/// `DEFAULT_GRID_POINTS` evenly spaced rebates from 0 to 4 times the
/// analytic rebate.
pub fn default_grid(config: &ExperimentConfig) -> Result<Vec<f64>> {
    let top = 4.0 * analytic_rebate(config)?;
    let n = DEFAULT_GRID_POINTS;
    Ok((0..n).map(|k| top * k as f64 / (n - 1) as f64).collect())
}

/// The posted-price curve against the optimal mechanism on one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Comparison {
    pub sweep: SweepResult,
    pub min_rebate: f64,
    pub min_posted_average: f64,
    pub optimal_average: f64,
    /// `min_posted_average / optimal_average`.
    pub ratio: f64,
    /// The minimizing rebate is neither end of the grid.
    pub interior_minimum: bool,
    /// The optimal average lies strictly below every posted average.
    pub dominated_everywhere: bool,
}

/// Sweeps `grid` (the default grid when `None`) and summarizes the curve.
pub fn compare(config: &ExperimentConfig, grid: Option<&[f64]>, seed: u64) -> Result<Comparison> {
    let default;
    let grid = match grid {
        Some(g) => g,
        None => {
            default = default_grid(config)?;
            &default
        }
    };
    let sweep = sweep(grid, config, seed)?;
    let (k, best) = sweep
        .points
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.average_social_cost.total_cmp(&b.1.average_social_cost))
        .expect("nonempty grid");
    let (min_rebate, min_posted_average) = (best.rebate, best.average_social_cost);
    let optimal_average = sweep.optimal_average;
    Ok(Comparison {
        min_rebate,
        min_posted_average,
        optimal_average,
        ratio: min_posted_average / optimal_average,
        interior_minimum: k > 0 && k + 1 < sweep.points.len(),
        dominated_everywhere: sweep.points.iter().all(|p| optimal_average < p.average_social_cost),
        sweep,
    })
}
