//! Exact real-time dispatch for tabulated load costs on the integer
//! curtailment grid.
//!
//! Exhaustive search over all grid profiles, organized as a dynamic program
//! over the running total curtailment: the reserve only sees the total, so
//! the minimum over profiles with a given total is a knapsack-style fold.

use crate::error::{Error, Result};
use crate::model::{CurtailmentBounds, System, TypeIdx};

/// Work limit (cells visited) for the dynamic program.
pub const GRID_WORK_LIMIT: f64 = 1e8;

/// Per-load optimal curtailments for mismatch `s` (before curtailment).
pub(crate) fn solve(system: &System, s: f64, types: &[TypeIdx]) -> Result<Vec<f64>> {
    let (gmin, gmax) = system
        .costs
        .load_grid()
        .ok_or_else(|| Error::UnsupportedFamily("load family is not tabulated".into()))?;

    let mut ranges = Vec::with_capacity(types.len());
    for &t in types {
        let (mut lo, mut hi) = (gmin, gmax);
        if system.bounds == CurtailmentBounds::Box {
            lo = lo.max(0);
            hi = hi.min(system.type_space.get(t).baseline as i64);
        }
        if lo > hi {
            return Err(Error::InvalidArgument(format!(
                "empty curtailment grid for type `{}`",
                system.type_space.get(t).id
            )));
        }
        ranges.push((lo, hi));
    }

    let total_span: i64 = ranges.iter().map(|(lo, hi)| hi - lo).sum();
    let width: i64 = ranges.iter().map(|(lo, hi)| hi - lo + 1).max().unwrap_or(1);
    let work = types.len() as f64 * (total_span + 1) as f64 * width as f64;
    if work > GRID_WORK_LIMIT {
        return Err(Error::TooLarge {
            what: "tabulated dispatch",
            count: work,
            limit: GRID_WORK_LIMIT,
        });
    }

    // best[v]: least load cost with total curtailment sum(lo) + v so far
    let span = total_span as usize;
    let mut best = vec![f64::INFINITY; span + 1];
    best[0] = 0.0;
    let mut reach = 0usize;
    let mut choice: Vec<Vec<u32>> = Vec::with_capacity(types.len());
    for (&t, &(lo, hi)) in types.iter().zip(&ranges) {
        let ty = system.type_space.get(t);
        let costs = (lo..=hi)
            .map(|k| system.costs.load(ty, k as f64))
            .collect::<Result<Vec<f64>>>()?;
        let w = (hi - lo) as usize;
        let mut next = vec![f64::INFINITY; span + 1];
        let mut pick = vec![0u32; reach + w + 1];
        for v in 0..=reach {
            if !best[v].is_finite() {
                continue;
            }
            for (k, c) in costs.iter().enumerate() {
                let cand = best[v] + c;
                if cand < next[v + k] {
                    next[v + k] = cand;
                    pick[v + k] = k as u32;
                }
            }
        }
        reach += w;
        best = next;
        choice.push(pick);
    }

    let base: i64 = ranges.iter().map(|r| r.0).sum();
    let mut arg = 0usize;
    let mut min = f64::INFINITY;
    for (v, b) in best.iter().enumerate().take(reach + 1) {
        let total = b + system.costs.reserve(s - (base + v as i64) as f64);
        if total < min {
            min = total;
            arg = v;
        }
    }

    let mut out = vec![0.0; types.len()];
    let mut v = arg;
    for i in (0..types.len()).rev() {
        let k = choice[i][v] as usize;
        out[i] = (ranges[i].0 + k as i64) as f64;
        v -= k;
    }
    Ok(out)
}
