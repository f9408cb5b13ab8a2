use super::inner_cost;
use super::scenarios::{ScenarioSet, ZSource};
use crate::error::{Error, Result};
use crate::model::{ExpectationMethod, JointTypeModel, System};

/// An expectation estimate; `std_error` is set for Monte Carlo estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectation {
    pub value: f64,
    pub std_error: Option<f64>,
}

/// Result of the day-ahead program, reused on every day of the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct DayAheadDecision {
    /// Scheduled generator output `g*` (0 when the generator is disabled).
    pub g_star: f64,
    pub reported_model: JointTypeModel,
    /// `W*`, the optimal expected social cost.
    pub w_star: f64,
    pub w_star_std_error: Option<f64>,
    /// `E[c_i(pi*_i(z, delta), delta_i)]` for each load of `reported_model`.
    pub expected_load_cost: Vec<f64>,
}

/// Inputs to the first-stage payments.
#[derive(Debug, Clone, PartialEq)]
pub struct VcgInputs {
    pub decision: DayAheadDecision,
    /// `W*` of the system without load `i`, for every load.
    pub w_minus: Vec<f64>,
}

/// Tolerance of the search for `g*`.
const G_TOLERANCE: f64 = 1e-8;

/// Minimizes a unimodal `f` on `[lo, hi]` to an interval of width `tol`.
/// Returns the best point probed and its value.
pub fn golden_section<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc <= fd { (c, fc) } else { (d, fd) })
}

struct Evaluated {
    value: f64,
    std_error: Option<f64>,
    /// Average load cost per group member, per group.
    group_load_cost: Vec<f64>,
}

fn evaluate(system: &System, set: &ScenarioSet, g: f64, detailed: bool) -> Result<Evaluated> {
    let n_types = set.n_types;
    let mut type_cost = vec![0.0; n_types];
    let mut group_cost = vec![0.0; set.groups.len()];
    let mut acc = 0.0;
    let mut acc_sq = 0.0;

    let add_loads = |w: f64, counts: &[u32], type_cost: &[f64], group_cost: &mut [f64]| {
        for (k, gc) in group_cost.iter_mut().enumerate() {
            let row = &counts[k * n_types..(k + 1) * n_types];
            let sum: f64 = row.iter().zip(type_cost).map(|(&c, &tc)| c as f64 * tc).sum();
            *gc += w * sum;
        }
    };

    for p in &set.profiles {
        match &set.z {
            ZSource::Shared(nodes) => {
                for &(z, wz) in nodes {
                    let w = p.weight * wz;
                    let v = inner_cost(system, z - g, &p.totals, &mut type_cost)?;
                    acc += w * v;
                    if detailed {
                        add_loads(w, &p.counts, &type_cost, &mut group_cost);
                    }
                }
            }
            ZSource::PerProfile => {
                let v = inner_cost(system, p.z - g, &p.totals, &mut type_cost)?;
                acc += p.weight * v;
                acc_sq += p.weight * v * v;
                if detailed {
                    add_loads(p.weight, &p.counts, &type_cost, &mut group_cost);
                }
            }
        }
    }

    let std_error = set.is_sampled().then(|| {
        let n = set.profiles.len() as f64;
        if n < 2.0 {
            return 0.0;
        }
        let var = (acc_sq - acc * acc).max(0.0) * n / (n - 1.0);
        (var / n).sqrt()
    });
    for (gc, members) in group_cost.iter_mut().zip(&set.groups) {
        *gc /= members.len() as f64;
    }
    Ok(Evaluated {
        value: system.costs.generator(g) + acc,
        std_error,
        group_load_cost: group_cost,
    })
}

fn with_seed(method: &ExpectationMethod) -> ExpectationMethod {
    match *method {
        ExpectationMethod::MonteCarlo { samples, seed } => ExpectationMethod::MonteCarlo {
            samples,
            seed: Some(seed.unwrap_or(0)),
        },
        m => m,
    }
}

fn build(
    system: &System,
    model: &JointTypeModel,
    exclude: Option<usize>,
    method: &ExpectationMethod,
) -> Result<ScenarioSet> {
    ScenarioSet::build(
        model,
        exclude,
        system.type_space.len(),
        &system.net_demand,
        &with_seed(method),
    )
}

/// `W(g) = c_g(g) + E[min over curtailments of the real-time cost]` for the
/// reported `model`.
pub fn expected_social_cost(
    g: f64,
    model: &JointTypeModel,
    system: &System,
    method: &ExpectationMethod,
) -> Result<Expectation> {
    let set = build(system, model, None, method)?;
    let e = evaluate(system, &set, g, false)?;
    Ok(Expectation {
        value: e.value,
        std_error: e.std_error,
    })
}

fn optimize(system: &System, set: &ScenarioSet, n_loads: usize) -> Result<(f64, Evaluated)> {
    let g_star = if system.costs.generator_enabled() {
        let bracket = system.net_demand.max_abs() + n_loads as f64 * system.type_space.d_max as f64;
        let (g, fg) = golden_section(
            |g| Ok(evaluate(system, set, g, false)?.value),
            0.0,
            bracket,
            G_TOLERANCE,
        )?;
        let f0 = evaluate(system, set, 0.0, false)?.value;
        if f0 <= fg {
            0.0
        } else {
            g
        }
    } else {
        0.0
    };
    let e = evaluate(system, set, g_star, true)?;
    Ok((g_star, e))
}

fn decision(model: JointTypeModel, set: &ScenarioSet, g_star: f64, e: Evaluated) -> DayAheadDecision {
    let n = model.n_loads();
    let mut expected_load_cost = vec![0.0; n];
    for (members, &cost) in set.groups.iter().zip(&e.group_load_cost) {
        for &m in members {
            expected_load_cost[m] = cost;
        }
    }
    DayAheadDecision {
        g_star,
        reported_model: model,
        w_star: e.value,
        w_star_std_error: e.std_error,
        expected_load_cost,
    }
}

/// Solves the day-ahead program: `g*` by golden-section search and the
/// expectations at `g*`.
pub fn solve_day_ahead(
    model: &JointTypeModel,
    system: &System,
    method: &ExpectationMethod,
) -> Result<DayAheadDecision> {
    let set = build(system, model, None, method)?;
    let (g_star, e) = optimize(system, &set, model.n_loads())?;
    Ok(decision(model.clone(), &set, g_star, e))
}

/// The day-ahead program with load `excluded` fully removed: its
/// distribution, baseline and flexibility. Expected load costs are indexed
/// by the remaining loads in their original order.
pub fn solve_day_ahead_excluding(
    model: &JointTypeModel,
    excluded: usize,
    system: &System,
    method: &ExpectationMethod,
) -> Result<DayAheadDecision> {
    let n = model.n_loads();
    if excluded >= n {
        return Err(Error::IndexOutOfRange {
            index: excluded,
            len: n,
        });
    }
    let mut set = build(system, model, Some(excluded), method)?;
    for members in &mut set.groups {
        for m in members.iter_mut() {
            if *m > excluded {
                *m -= 1;
            }
        }
    }
    let (g_star, e) = optimize(system, &set, n - 1)?;
    Ok(decision(model.without(excluded), &set, g_star, e))
}

/// `W*` and `W*_{-i}` for every load. Loads with identical reported
/// distributions share one excluded solve.
pub fn vcg_inputs(model: &JointTypeModel, system: &System, method: &ExpectationMethod) -> Result<VcgInputs> {
    let decision = solve_day_ahead(model, system, method)?;
    let mut w_minus = vec![0.0; model.n_loads()];
    for group in model.groups() {
        let w = solve_day_ahead_excluding(model, group.members[0], system, method)?.w_star;
        for &m in &group.members {
            w_minus[m] = w;
        }
    }
    Ok(VcgInputs { decision, w_minus })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        CostModel, CurtailmentBounds, GeneratorCost, LoadType, NetDemandModel, TypeDistribution, TypeIdx, TypeSpace,
    };

    fn deterministic() -> (System, JointTypeModel) {
        let sys = System {
            type_space: TypeSpace::new(3, vec![LoadType::new("k1", 3, 1.0), LoadType::new("k2", 3, 2.0)]),
            net_demand: NetDemandModel::constant(10.0),
            costs: CostModel::quadratic(5.0),
            bounds: CurtailmentBounds::Unconstrained,
        };
        let model = JointTypeModel::new(vec![
            TypeDistribution::degenerate(2, TypeIdx(0)),
            TypeDistribution::degenerate(2, TypeIdx(1)),
        ]);
        (sys, model)
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (x, fx) = golden_section(|x| Ok((x - 1.3) * (x - 1.3) + 2.0), 0.0, 10.0, 1e-10).unwrap();
        // flat bottom: x resolves to about sqrt(machine epsilon)
        assert!((x - 1.3).abs() < 1e-6);
        assert!((fx - 2.0).abs() < 1e-15);
    }

    #[test]
    fn generator_disabled() {
        let (sys, model) = deterministic();
        let d = solve_day_ahead(&model, &sys, &ExpectationMethod::Enumerate).unwrap();
        assert_eq!(d.g_star, 0.0);
        assert!((d.w_star - 80.0).abs() < 1e-9);
        assert!((d.expected_load_cost[0] - 50.0).abs() < 1e-9);
        assert!((d.expected_load_cost[1] - 25.0).abs() < 1e-9);
    }

    #[test]
    fn quadratic_generator() {
        let (mut sys, model) = deterministic();
        sys.costs = sys.costs.with_generator(GeneratorCost::Quadratic { a: 1.0 });
        let d = solve_day_ahead(&model, &sys, &ExpectationMethod::Enumerate).unwrap();
        assert!((d.g_star - 80.0 / 21.0).abs() < 1e-6);
        assert!((d.w_star - 1280.0 / 21.0).abs() < 1e-6);
        let at = expected_social_cost(80.0 / 21.0, &model, &sys, &ExpectationMethod::Enumerate).unwrap();
        assert!((at.value - 1280.0 / 21.0).abs() < 1e-9);
    }

    #[test]
    fn excluded_values() {
        let (sys, model) = deterministic();
        let m = ExpectationMethod::Enumerate;
        let w1 = solve_day_ahead_excluding(&model, 0, &sys, &m).unwrap();
        let w2 = solve_day_ahead_excluding(&model, 1, &sys, &m).unwrap();
        assert!((w1.w_star - 845.0 / 6.0).abs() < 1e-9);
        assert!((w2.w_star - 845.0 / 11.0).abs() < 1e-9);
        assert_eq!(w1.expected_load_cost.len(), 1);
        assert!(solve_day_ahead_excluding(&model, 2, &sys, &m).is_err());
        let vcg = vcg_inputs(&model, &sys, &m).unwrap();
        assert_eq!(vcg.w_minus, vec![w1.w_star, w2.w_star]);
    }

    #[test]
    fn single_load_excluded_leaves_reserve_only() {
        let (sys, _) = deterministic();
        let model = JointTypeModel::new(vec![TypeDistribution::degenerate(2, TypeIdx(0))]);
        let d = solve_day_ahead_excluding(&model, 0, &sys, &ExpectationMethod::Enumerate).unwrap();
        assert_eq!(d.w_star, 5.0 * 100.0);
    }

    #[test]
    fn zero_demand_schedules_nothing() {
        let (mut sys, model) = deterministic();
        sys.type_space.types.iter_mut().for_each(|t| t.baseline = 0);
        sys.net_demand = NetDemandModel::constant(0.0);
        sys.costs = sys.costs.with_generator(GeneratorCost::Quadratic { a: 1.0 });
        let d = solve_day_ahead(&model, &sys, &ExpectationMethod::Enumerate).unwrap();
        assert_eq!(d.g_star, 0.0);
        assert_eq!(d.w_star, 0.0);
    }
}
