//! Brute-force reference implementations used to check the solvers and the
//! incentive properties of the mechanism on small instances.

mod deviations;
pub mod games;
pub mod verify;

pub use deviations::{enumerate_deviations, DeviationEntry, DeviationReport, SeedOutcome, MIN_HORIZON};

use crate::dispatch::RealTimeSolution;
use crate::error::{Error, Result};
use crate::model::{CurtailmentBounds, JointTypeModel, LoadCostFamily, System, TypeIdx};

/// Most cells [`brute_force_real_time`] may visit.
pub const GRID_POINT_LIMIT: f64 = 1e8;
/// Largest scenario count of [`exact_expectation`].
pub const SCENARIO_LIMIT: f64 = 1e5;
/// Most loads [`brute_force_real_time`] accepts.
pub const MAX_BRUTE_FORCE_LOADS: usize = 4;

/// Upper bound on the optimal inner cost: the cost of a feasible profile
/// `x_j = t / kappa_j` (clipped to the box), or of curtailing nothing.
fn cost_budget(system: &System, s: f64, reported: &[TypeIdx]) -> f64 {
    let mut budget = system.costs.reserve(s);
    let (Some(a), LoadCostFamily::Quadratic) = (system.costs.reserve_quadratic(), &system.costs.load) else {
        return budget;
    };
    let space = &system.type_space;
    let inv: f64 = reported.iter().map(|&t| 1.0 / space.get(t).kappa).sum();
    if !(inv.is_finite() && inv > 0.0) {
        return budget;
    }
    let t = 2.0 * a * s * inv / (2.0 * a * inv * inv + inv);
    let mut total = 0.0;
    let mut loads = 0.0;
    for &r in reported {
        let ty = space.get(r);
        let mut x = t / ty.kappa;
        if system.bounds == CurtailmentBounds::Box {
            x = x.clamp(0.0, ty.baseline as f64);
        }
        total += x;
        loads += 0.5 * ty.kappa * x * x;
    }
    let cost = system.costs.reserve(s - total) + loads;
    if cost.is_finite() {
        budget = budget.min(cost);
    }
    budget
}

/// Curtailment range searched for one load. Always covers
/// `[-d_max, 2 d_max]`; for quadratic costs it also covers every
/// curtailment whose own cost `kappa / 2 x^2` stays within `budget`, an
/// upper bound on the optimum.
pub(crate) fn search_range(system: &System, budget: f64, baseline: f64, kappa: f64) -> (f64, f64) {
    let d_max = system.type_space.d_max as f64;
    let (mut lo, mut hi) = (-d_max, 2.0 * d_max);
    if matches!(system.costs.load, LoadCostFamily::Quadratic) {
        let r = (2.0 * budget / kappa).sqrt();
        lo = lo.min(-r);
        hi = hi.max(r);
    } else if let Some((a, b)) = system.costs.load_grid() {
        lo = lo.min(a as f64);
        hi = hi.max(b as f64);
    }
    if system.bounds == CurtailmentBounds::Box {
        lo = lo.max(0.0);
        hi = hi.min(baseline);
    }
    (lo, hi)
}

/// Per-load search ranges for mismatch `s`.
pub(crate) fn search_ranges(system: &System, s: f64, reported: &[TypeIdx]) -> Vec<(f64, f64)> {
    let budget = cost_budget(system, s, reported);
    reported
        .iter()
        .map(|&t| {
            let ty = system.type_space.get(t);
            search_range(system, budget, ty.baseline as f64, ty.kappa)
        })
        .collect()
}

/// Exact minimum of the real-time program over the grid of curtailment
/// profiles whose entries are integer multiples of `step` (integers for
/// tabulated costs).
///
/// Every profile is covered: profiles are folded load by load into the
/// least load cost per total curtailment, and the reserve cost is added per
/// total. The work (cells visited) is capped at [`GRID_POINT_LIMIT`].
/// Box bounds are integers, so they lie on the grid when `1 / step` is an
/// integer.
pub fn brute_force_real_time(
    system: &System,
    z: f64,
    g: f64,
    reported: &[TypeIdx],
    step: f64,
) -> Result<RealTimeSolution> {
    let n = reported.len();
    if n > MAX_BRUTE_FORCE_LOADS {
        return Err(Error::InvalidArgument(format!(
            "brute force handles at most {MAX_BRUTE_FORCE_LOADS} loads (got {n})"
        )));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "grid step must be positive (got {step})"
        )));
    }
    let step = match system.costs.load {
        LoadCostFamily::Tabulated { .. } => step.max(1.0).round(),
        LoadCostFamily::Quadratic => step,
    };
    let space = &system.type_space;
    let s = z - g + reported.iter().map(|&t| space.baseline(t)).sum::<f64>();
    let mut axes = Vec::with_capacity(n);
    for (lo, hi) in search_ranges(system, s, reported) {
        let (a, b) = ((lo / step).ceil(), (hi / step).floor());
        if a > b {
            return Err(Error::InvalidArgument("empty curtailment grid".into()));
        }
        axes.push((a as i64, b as i64));
    }
    let width = |&(a, b): &(i64, i64)| (b - a + 1) as f64;
    let totals: f64 = axes.iter().map(width).sum();
    let work: f64 = axes.iter().map(|ax| width(ax) * totals).sum();
    if work > GRID_POINT_LIMIT {
        return Err(Error::TooLarge {
            what: "brute-force grid",
            count: work,
            limit: GRID_POINT_LIMIT,
        });
    }

    // best[v]: least load cost of the loads so far with total index base + v;
    // tabulated costs are infinite outside their table
    let mut best = vec![0.0];
    let mut picks: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut tables: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (&t, &(a, b)) in reported.iter().zip(&axes) {
        let ty = space.get(t);
        let table: Vec<f64> = (a..=b)
            .map(|k| system.costs.load(ty, k as f64 * step).unwrap_or(f64::INFINITY))
            .collect();
        let mut next = vec![f64::INFINITY; best.len() + table.len() - 1];
        let mut pick = vec![0usize; next.len()];
        for (v, &bv) in best.iter().enumerate() {
            for (k, &c) in table.iter().enumerate() {
                if bv + c < next[v + k] {
                    next[v + k] = bv + c;
                    pick[v + k] = k;
                }
            }
        }
        best = next;
        picks.push(pick);
        tables.push(table);
    }
    let base: i64 = axes.iter().map(|ax| ax.0).sum();
    let mut arg = (f64::INFINITY, 0usize);
    for (v, &bv) in best.iter().enumerate() {
        let cost = bv + system.costs.reserve(s - (base + v as i64) as f64 * step);
        if cost < arg.0 {
            arg = (cost, v);
        }
    }

    let mut curtailments = vec![0.0; n];
    let mut load_costs = vec![0.0; n];
    let mut v = arg.1;
    for j in (0..n).rev() {
        let k = picks[j][v];
        curtailments[j] = (axes[j].0 + k as i64) as f64 * step;
        load_costs[j] = tables[j][k];
        v -= k;
    }
    let mut reserve = z - g;
    for (&t, &x) in reported.iter().zip(&curtailments) {
        reserve += space.baseline(t) - x;
    }
    let generator_cost = system.costs.generator(g);
    let reserve_cost = system.costs.reserve(reserve);
    Ok(RealTimeSolution {
        social_cost: generator_cost + reserve_cost + load_costs.iter().sum::<f64>(),
        curtailments,
        reserve,
        generator_cost,
        reserve_cost,
        load_costs,
        price: None,
    })
}

/// Agreement tolerance between the dispatch solver and a grid of spacing
/// `step`: `max(1e-6, 10 step^2 (2 a n + kappa_max))`.
pub fn grid_tolerance(system: &System, n: usize, step: f64) -> f64 {
    let a = system.costs.reserve_quadratic().unwrap_or(0.0);
    let kappa_max = system.type_space.types.iter().map(|t| t.kappa).fold(0.0, f64::max);
    (10.0 * step * step * (2.0 * a * n as f64 + kappa_max)).max(1e-6)
}

/// `c_g(g) + E[inner optimum]` by summing over every per-load type profile
/// and every net-demand atom.
pub fn exact_expectation(g: f64, model: &JointTypeModel, system: &System) -> Result<f64> {
    if !system.net_demand.is_discrete() {
        return Err(Error::InvalidArgument(
            "exact expectation needs a discrete net-demand model".into(),
        ));
    }
    let supports: Vec<Vec<TypeIdx>> = model.per_load().iter().map(|d| d.support()).collect();
    let count: f64 = supports.iter().map(|s| s.len() as f64).product();
    if count > SCENARIO_LIMIT {
        return Err(Error::TooLarge {
            what: "exact expectation",
            count,
            limit: SCENARIO_LIMIT,
        });
    }
    let atoms = system.net_demand.nodes();
    let n = model.n_loads();
    let mut idx = vec![0usize; n];
    let mut total = 0.0;
    loop {
        let profile: Vec<TypeIdx> = (0..n).map(|i| supports[i][idx[i]]).collect();
        let prob: f64 = (0..n).map(|i| model.load(i).prob(profile[i])).product();
        for &(z, pz) in &atoms {
            let sol = crate::dispatch::solve_real_time(system, z, g, &profile)?;
            total += prob * pz * (sol.social_cost - sol.generator_cost);
        }
        let mut j = 0;
        while j < n {
            idx[j] += 1;
            if idx[j] < supports[j].len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
        if j == n {
            break;
        }
    }
    Ok(system.costs.generator(g) + total)
}

/// `(sup_nu |f_{i,nu}|, sup_(nu,eta) |h_{i,nu,eta}|)` recounted directly from
/// a report log.
pub fn recount_statistics(log: &[Vec<TypeIdx>], reported: &JointTypeModel, i: usize) -> (f64, f64) {
    use std::collections::HashMap;
    if log.is_empty() {
        return (0.0, 0.0);
    }
    let l = log.len() as f64;
    let theta = reported.load(i).probs();
    let k = theta.len();
    let mut marginal = vec![0u32; k];
    let mut classes: HashMap<Vec<TypeIdx>, Vec<u32>> = HashMap::new();
    for p in log {
        marginal[p[i].get()] += 1;
        let mut eta = p.clone();
        eta.remove(i);
        classes.entry(eta).or_insert_with(|| vec![0; k])[p[i].get()] += 1;
    }
    let sup_f = (0..k)
        .map(|nu| (marginal[nu] as f64 / l - theta[nu]).abs())
        .fold(0.0, f64::max);
    let mut sup_h: f64 = 0.0;
    for counts in classes.values() {
        let m: u32 = counts.iter().sum();
        for nu in 0..k {
            sup_h = sup_h.max((counts[nu] as f64 / l - theta[nu] * m as f64 / l).abs());
        }
    }
    (sup_f, sup_h)
}
