//! Built-in instances used by the verification suites.

use crate::agents::StrategySpec;
use crate::model::{
    BaselineMode, CostModel, CurtailmentBounds, ExpectationMethod, ExperimentConfig, LoadGroupSpec, LoadType,
    NetDemandModel, PenaltySchedule, TypeDistribution, TypeSpace, UtilityConvention,
};

fn group(count: usize, probs: Vec<f64>) -> LoadGroupSpec {
    LoadGroupSpec {
        count,
        distribution: TypeDistribution::new(probs).expect("built-in distribution"),
        strategy: StrategySpec::Truthful,
    }
}

/// Two loads with fixed types `k1 = (3, 1)` and `k2 = (3, 2)`, `z = 10`,
/// `c_r = 5 x^2`: the optimal curtailments are `(10, 5)` at cost 80.
pub fn deterministic_game(days: u64) -> ExperimentConfig {
    ExperimentConfig {
        seed: 1,
        days,
        mode: BaselineMode::ExplicitBaseline,
        curtailment_bounds: CurtailmentBounds::Unconstrained,
        type_space: TypeSpace::new(3, vec![LoadType::new("k1", 3, 1.0), LoadType::new("k2", 3, 2.0)]),
        loads: vec![group(1, vec![1.0, 0.0]), group(1, vec![0.0, 1.0])],
        net_demand: NetDemandModel::constant(10.0),
        costs: CostModel::quadratic(5.0),
        penalty: PenaltySchedule::default(),
        expectation: ExpectationMethod::Enumerate,
        utility_convention: UtilityConvention::PhysicalReduction,
    }
}

/// Three types `a = (1, 1)`, `b = (2, 1)`, `c = (2, 3)`, two loads with
/// `theta = (0.4, 0.3, 0.3)`, `z` uniform on `{2, 4, 6}`, `c_r = 5 x^2`.
pub fn small_game(days: u64) -> ExperimentConfig {
    ExperimentConfig {
        seed: 1,
        days,
        mode: BaselineMode::ExplicitBaseline,
        curtailment_bounds: CurtailmentBounds::Unconstrained,
        type_space: TypeSpace::new(
            2,
            vec![
                LoadType::new("a", 1, 1.0),
                LoadType::new("b", 2, 1.0),
                LoadType::new("c", 2, 3.0),
            ],
        ),
        loads: vec![group(2, vec![0.4, 0.3, 0.3])],
        net_demand: NetDemandModel::discrete(vec![2.0, 4.0, 6.0], vec![1.0 / 3.0; 3]),
        costs: CostModel::quadratic(5.0),
        penalty: PenaltySchedule::default(),
        expectation: ExpectationMethod::Enumerate,
        utility_convention: UtilityConvention::PhysicalReduction,
    }
}

/// Two loads of the net-demand kind with two types `k1 = (0, 1)` and
/// `k2 = (0, 2)`, `theta = (0.5, 0.5)`, `z` uniform on `{4, 8, 12}`.
pub fn net_demand_game(days: u64) -> ExperimentConfig {
    ExperimentConfig {
        seed: 1,
        days,
        mode: BaselineMode::NetDemand,
        curtailment_bounds: CurtailmentBounds::Unconstrained,
        type_space: TypeSpace::new(0, vec![LoadType::new("k1", 0, 1.0), LoadType::new("k2", 0, 2.0)]),
        loads: vec![group(2, vec![0.5, 0.5])],
        net_demand: NetDemandModel::discrete(vec![4.0, 8.0, 12.0], vec![1.0 / 3.0; 3]),
        costs: CostModel::quadratic(5.0),
        penalty: PenaltySchedule::default(),
        expectation: ExpectationMethod::Enumerate,
        utility_convention: UtilityConvention::PhysicalReduction,
    }
}

/// The small game's type space with `theta = (0.9, 0.1, 0)` and the
/// threshold multiplier at its minimum 1. Type `c` never occurs, so a
/// report putting mass 0.4 on `c` has `|f| = 0.4` on every day.
pub fn penalty_game(days: u64) -> ExperimentConfig {
    let mut cfg = small_game(days);
    cfg.loads = vec![group(2, vec![0.9, 0.1, 0.0])];
    cfg.penalty = PenaltySchedule::default().with_multiplier(1.0);
    cfg
}

/// The misreport of [`penalty_game`]: `(0.5, 0.1, 0.4)`, at total
/// variation 0.4 from the truth.
pub fn penalty_game_misreport() -> StrategySpec {
    StrategySpec::dist_misreport(vec![0.5, 0.1, 0.4]).expect("built-in distribution")
}

/// Truthful play plus twelve deviations for [`small_game`]: distribution
/// misreports at total variation 0.1, 0.2 and 0.4, constant type swaps and
/// maps, baseline inflation, cost exaggeration and intermittent variants.
pub fn incentive_candidates() -> Vec<StrategySpec> {
    let dist = |p: Vec<f64>| StrategySpec::dist_misreport(p).expect("built-in distribution");
    vec![
        StrategySpec::Truthful,
        dist(vec![0.5, 0.2, 0.3]),
        dist(vec![0.2, 0.3, 0.5]),
        dist(vec![0.8, 0.1, 0.1]),
        StrategySpec::type_swap("a", "b"),
        StrategySpec::type_swap("a", "c"),
        StrategySpec::type_map(&[("a", "c")]),
        StrategySpec::BaselineInflate { delta: 1 },
        StrategySpec::cost_exaggerate(&[("b", 3.0)]),
        StrategySpec::intermittent(StrategySpec::type_map(&[("a", "c")]), 2),
        StrategySpec::intermittent(StrategySpec::type_map(&[("a", "c")]), 3),
        StrategySpec::intermittent(StrategySpec::BaselineInflate { delta: 1 }, 2),
        StrategySpec::intermittent(StrategySpec::cost_exaggerate(&[("b", 3.0)]), 2),
    ]
}
