//! Optimal dispatch: the real-time curtailment program for a realized
//! `(z, reported types)` and the day-ahead stochastic program over the
//! reported distributions.

mod clearing;
mod day_ahead;
mod scenarios;
mod tabulated;

pub use day_ahead::{
    expected_social_cost, golden_section, solve_day_ahead, solve_day_ahead_excluding, vcg_inputs, DayAheadDecision,
    Expectation, VcgInputs,
};
pub use tabulated::GRID_WORK_LIMIT;

use clearing::{clearing_price, Block};

use crate::error::{Error, Result};
use crate::model::{CurtailmentBounds, LoadCostFamily, ReserveCost, System, TypeIdx};

/// Optimal real-time dispatch for one day.
#[derive(Debug, Clone, PartialEq)]
pub struct RealTimeSolution {
    /// `pi_i`, one per load.
    pub curtailments: Vec<f64>,
    /// Reserve purchase `g_r` (negative for a sale).
    pub reserve: f64,
    pub generator_cost: f64,
    pub reserve_cost: f64,
    /// `c_i(pi_i, reported type_i)`.
    pub load_costs: Vec<f64>,
    pub social_cost: f64,
    /// Marginal reserve price `c_r'(g_r)` on the quadratic path.
    pub price: Option<f64>,
}

/// Per-type curtailment limits under `bounds` for reported baseline `d`.
fn limits(bounds: CurtailmentBounds, d: f64) -> (f64, f64) {
    match bounds {
        CurtailmentBounds::Unconstrained => (f64::NEG_INFINITY, f64::INFINITY),
        CurtailmentBounds::Box => (0.0, d),
    }
}

fn check_family(system: &System) -> Result<()> {
    if matches!(system.costs.load, LoadCostFamily::Quadratic)
        && matches!(system.costs.reserve, ReserveCost::Tabulated { .. })
    {
        return Err(Error::UnsupportedFamily(
            "tabulated reserve cost requires a tabulated load family".into(),
        ));
    }
    Ok(())
}

/// Solves `min c_r(g_r) + sum_i c_i(x_i, reported_i)` subject to
/// `g_r = z - g + sum_i (d_i - x_i)` and the curtailment bounds.
pub fn solve_real_time(system: &System, z: f64, g: f64, reported: &[TypeIdx]) -> Result<RealTimeSolution> {
    check_family(system)?;
    let space = &system.type_space;
    for &t in reported {
        if t.get() >= space.len() {
            return Err(Error::UnknownType(format!("type index {}", t.0)));
        }
    }
    let baselines: f64 = reported.iter().map(|&t| space.baseline(t)).sum();
    let (curtailments, price) = match system.costs.load {
        LoadCostFamily::Quadratic => {
            let a = system.costs.reserve_quadratic().expect("checked above");
            let mut counts = vec![0u32; space.len()];
            for &t in reported {
                counts[t.get()] += 1;
            }
            let (price, per_type) = quadratic_by_type(system, a, z - g + baselines, &counts);
            (
                reported.iter().map(|&t| per_type[t.get()]).collect::<Vec<_>>(),
                Some(price),
            )
        }
        LoadCostFamily::Tabulated { .. } => (tabulated::solve(system, z - g + baselines, reported)?, None),
    };

    let mut reserve = z - g;
    for (&t, &x) in reported.iter().zip(&curtailments) {
        reserve += space.baseline(t) - x;
    }
    let load_costs = reported
        .iter()
        .zip(&curtailments)
        .map(|(&t, &x)| system.costs.load(space.get(t), x))
        .collect::<Result<Vec<f64>>>()?;
    let generator_cost = system.costs.generator(g);
    let reserve_cost = system.costs.reserve(reserve);
    let social_cost = generator_cost + reserve_cost + load_costs.iter().sum::<f64>();
    Ok(RealTimeSolution {
        curtailments,
        reserve,
        generator_cost,
        reserve_cost,
        load_costs,
        social_cost,
        price,
    })
}

/// Quadratic path aggregated by type: returns the clearing price and the
/// curtailment of each type (0 for absent types) for total mismatch `s`.
pub(crate) fn quadratic_by_type(system: &System, a: f64, s: f64, counts: &[u32]) -> (f64, Vec<f64>) {
    let space = &system.type_space;
    let blocks: Vec<Block> = space
        .types
        .iter()
        .zip(counts)
        .filter(|(_, &c)| c > 0)
        .map(|(t, &c)| {
            let (lo, hi) = limits(system.bounds, t.baseline as f64);
            Block {
                kappa: t.kappa,
                lo,
                hi,
                mult: c as f64,
            }
        })
        .collect();
    let price = clearing_price(a, &blocks, s);
    let per_type = space
        .types
        .iter()
        .zip(counts)
        .map(|(t, &c)| {
            if c == 0 {
                return 0.0;
            }
            let (lo, hi) = limits(system.bounds, t.baseline as f64);
            Block {
                kappa: t.kappa,
                lo,
                hi,
                mult: 1.0,
            }
            .response(price)
        })
        .collect();
    (price, per_type)
}

/// Inner optimum (reserve plus load costs, no generator) for a type-count
/// profile with `z - g = shifted`. Writes the per-type load cost of one
/// load of each present type into `type_cost`.
pub(crate) fn inner_cost(system: &System, shifted: f64, counts: &[u32], type_cost: &mut [f64]) -> Result<f64> {
    let space = &system.type_space;
    let baselines: f64 = counts
        .iter()
        .enumerate()
        .map(|(t, &c)| c as f64 * space.types[t].baseline as f64)
        .sum();
    let s = shifted + baselines;
    match system.costs.load {
        LoadCostFamily::Quadratic => {
            let a = system.costs.reserve_quadratic().ok_or_else(|| {
                Error::UnsupportedFamily("tabulated reserve cost requires a tabulated load family".into())
            })?;
            let (_, per_type) = quadratic_by_type(system, a, s, counts);
            let mut total_x = 0.0;
            let mut loads = 0.0;
            for (t, &c) in counts.iter().enumerate() {
                if c == 0 {
                    type_cost[t] = 0.0;
                    continue;
                }
                let x = per_type[t];
                let cost = 0.5 * space.types[t].kappa * x * x;
                type_cost[t] = cost;
                total_x += c as f64 * x;
                loads += c as f64 * cost;
            }
            Ok(system.costs.reserve(s - total_x) + loads)
        }
        LoadCostFamily::Tabulated { .. } => {
            let types: Vec<TypeIdx> = counts
                .iter()
                .enumerate()
                .flat_map(|(t, &c)| std::iter::repeat(TypeIdx::from(t)).take(c as usize))
                .collect();
            let xs = tabulated::solve(system, s, &types)?;
            type_cost.iter_mut().for_each(|c| *c = 0.0);
            let mut total_x = 0.0;
            let mut loads = 0.0;
            for (&t, &x) in types.iter().zip(&xs) {
                let cost = system.costs.load(space.get(t), x)?;
                type_cost[t.get()] += cost / counts[t.get()] as f64;
                total_x += x;
                loads += cost;
            }
            Ok(system.costs.reserve(s - total_x) + loads)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CostModel, GeneratorCost, LoadType, NetDemandModel, TypeSpace};
    use std::collections::BTreeMap;

    fn two_load_system(bounds: CurtailmentBounds) -> System {
        System {
            type_space: TypeSpace::new(3, vec![LoadType::new("k1", 3, 1.0), LoadType::new("k2", 3, 2.0)]),
            net_demand: NetDemandModel::constant(10.0),
            costs: CostModel::quadratic(5.0),
            bounds,
        }
    }

    #[test]
    fn deterministic_instance_unconstrained() {
        let sys = two_load_system(CurtailmentBounds::Unconstrained);
        let sol = solve_real_time(&sys, 10.0, 0.0, &[TypeIdx(0), TypeIdx(1)]).unwrap();
        assert!((sol.curtailments[0] - 10.0).abs() < 1e-9);
        assert!((sol.curtailments[1] - 5.0).abs() < 1e-9);
        assert!((sol.reserve - 1.0).abs() < 1e-9);
        assert!((sol.social_cost - 80.0).abs() < 1e-9);
        let price = sol.price.unwrap();
        assert!((price - 2.0 * 5.0 * sol.reserve).abs() < 1e-9);
        assert!((1.0 * sol.curtailments[0] - price).abs() < 1e-9);
        assert!((2.0 * sol.curtailments[1] - price).abs() < 1e-9);
    }

    #[test]
    fn deterministic_instance_box() {
        let sys = two_load_system(CurtailmentBounds::Box);
        let sol = solve_real_time(&sys, 10.0, 0.0, &[TypeIdx(0), TypeIdx(1)]).unwrap();
        assert_eq!(sol.curtailments, vec![3.0, 3.0]);
        assert_eq!(sol.reserve, 10.0);
        assert!((sol.social_cost - 513.5).abs() < 1e-9);
    }

    #[test]
    fn zero_mismatch() {
        let mut sys = two_load_system(CurtailmentBounds::Unconstrained);
        sys.type_space.types.iter_mut().for_each(|t| t.baseline = 0);
        let sol = solve_real_time(&sys, 0.0, 0.0, &[TypeIdx(0), TypeIdx(1)]).unwrap();
        assert_eq!(sol.curtailments, vec![0.0, 0.0]);
        assert_eq!(sol.reserve, 0.0);
        assert_eq!(sol.social_cost, 0.0);
    }

    #[test]
    fn social_cost_is_the_sum_of_entity_costs() {
        let mut sys = two_load_system(CurtailmentBounds::Unconstrained);
        sys.costs = sys.costs.with_generator(GeneratorCost::Quadratic { a: 1.0 });
        let sol = solve_real_time(&sys, 10.0, 2.5, &[TypeIdx(1), TypeIdx(0), TypeIdx(1)]).unwrap();
        let sum = sol.generator_cost + sol.reserve_cost + sol.load_costs.iter().sum::<f64>();
        assert!((sol.social_cost - sum).abs() <= 1e-9 * sum.abs().max(1.0));
        assert_eq!(sol.generator_cost, 6.25);
        // balance, recomputed in load order
        let d = 3.0;
        let expect = 10.0 - 2.5 + (d - sol.curtailments[0]) + (d - sol.curtailments[1]) + (d - sol.curtailments[2]);
        assert_eq!(sol.reserve, expect);
    }

    #[test]
    fn tabulated_family_by_search() {
        let mut tables = BTreeMap::new();
        // convex-ish and a non-convex table
        tables.insert("k1".to_string(), vec![0.0, 0.5, 2.0, 4.5, 8.0]);
        tables.insert("k2".to_string(), vec![0.0, 5.0, 1.0, 9.0, 16.0]);
        let sys = System {
            type_space: TypeSpace::new(3, vec![LoadType::new("k1", 3, 1.0), LoadType::new("k2", 3, 2.0)]),
            net_demand: NetDemandModel::constant(1.0),
            costs: CostModel {
                generator: GeneratorCost::Disabled,
                reserve: ReserveCost::Quadratic { a: 1.0 },
                load: LoadCostFamily::Tabulated {
                    min_curtailment: 0,
                    tables,
                },
            },
            bounds: CurtailmentBounds::Unconstrained,
        };
        let types = [TypeIdx(0), TypeIdx(1)];
        let sol = solve_real_time(&sys, 1.0, 0.0, &types).unwrap();
        let mut best = f64::INFINITY;
        for a in 0..5 {
            for b in 0..5 {
                let c = sys.costs.load(sys.type_space.get(types[0]), a as f64).unwrap()
                    + sys.costs.load(sys.type_space.get(types[1]), b as f64).unwrap()
                    + sys.costs.reserve(7.0 - (a + b) as f64);
                best = best.min(c);
            }
        }
        assert_eq!(sol.social_cost, best);
    }

    #[test]
    fn tabulated_reserve_needs_tabulated_loads() {
        let mut sys = two_load_system(CurtailmentBounds::Unconstrained);
        sys.costs.reserve = ReserveCost::Tabulated {
            points: vec![(0.0, 0.0), (1.0, 1.0)],
        };
        let err = solve_real_time(&sys, 1.0, 0.0, &[TypeIdx(0)]).unwrap_err();
        assert!(matches!(err, Error::UnsupportedFamily(_)));
    }
}
