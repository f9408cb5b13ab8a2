use drmarket_core::agents::StrategySpec;
use drmarket_core::model::{sample_day, DaySampler, LoadGroupSpec, UtilityConvention};
use drmarket_core::oracle::games::{deterministic_game, small_game};
use drmarket_core::{
    validate_config, BaselineMode, CostModel, CurtailmentBounds, ExpectationMethod, ExperimentConfig, LoadType,
    NetDemandModel, PenaltySchedule, TypeDistribution, TypeSpace,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn arb_config() -> impl Strategy<Value = ExperimentConfig> {
    (
        any::<u64>(),
        1u64..5000,
        prop::collection::vec((0u32..4, 0.1f64..10.0), 1..4),
        1usize..50,
        -10.0f64..10.0,
        0.1f64..20.0,
        0.1f64..10.0,
        prop::bool::ANY,
        1.0f64..4.0,
    )
        .prop_map(|(seed, days, types, count, lo, width, a, boxed, m)| {
            let k = types.len();
            let d_max = types.iter().map(|t| t.0).max().unwrap();
            ExperimentConfig {
                seed,
                days,
                mode: BaselineMode::ExplicitBaseline,
                curtailment_bounds: if boxed {
                    CurtailmentBounds::Box
                } else {
                    CurtailmentBounds::Unconstrained
                },
                type_space: TypeSpace::new(
                    d_max,
                    types
                        .iter()
                        .enumerate()
                        .map(|(j, &(d, kappa))| LoadType::new(format!("t{j}"), d, kappa))
                        .collect(),
                ),
                loads: vec![LoadGroupSpec {
                    count,
                    distribution: TypeDistribution::uniform(k),
                    strategy: StrategySpec::Truthful,
                }],
                net_demand: NetDemandModel::uniform(lo, lo + width),
                costs: CostModel::quadratic(a),
                penalty: PenaltySchedule::default().with_multiplier(m),
                expectation: ExpectationMethod::MonteCarlo {
                    samples: 100,
                    seed: None,
                },
                utility_convention: UtilityConvention::PhysicalReduction,
            }
        })
}

proptest! {
    #[test]
    fn config_round_trips(cfg in arb_config()) {
        prop_assert!(cfg.validate().is_ok());
        let back = validate_config(&cfg.to_json_pretty()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

#[test]
fn threshold_schedule_properties() {
    let s = PenaltySchedule::default();
    let mut prev_ratio = 0.0;
    for l in 1..=1_000_000u64 {
        assert!(s.threshold(l) >= s.lower_bound(l));
        let ratio = s.penalty(l) / l as f64;
        assert!(ratio > prev_ratio, "J_p(l)/l not increasing at {l}");
        prev_ratio = ratio;
    }
    assert!(s.threshold(1_000_000) < s.threshold(10));
}

#[test]
fn equal_seeds_give_equal_streams() {
    let cfg = small_game(1);
    let draw = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..100).map(|_| sample_day(&cfg, &mut rng)).collect::<Vec<_>>()
    };
    assert_eq!(draw(4), draw(4));
    assert_ne!(draw(4), draw(5));
}

#[test]
fn sampler_reuse_matches_fresh_draws() {
    let cfg = small_game(1);
    let sampler = DaySampler::from_config(&cfg);
    let mut a = ChaCha8Rng::seed_from_u64(9);
    let mut b = ChaCha8Rng::seed_from_u64(9);
    let mut types = Vec::new();
    for _ in 0..50 {
        let z = sampler.sample_into(&mut a, &mut types);
        let day = sampler.sample(&mut b);
        assert_eq!((z, &types), (day.z, &day.types));
    }
}

#[test]
fn malformed_configs_name_the_field() {
    let mut v = serde_json::to_value(deterministic_game(5)).unwrap();
    v["typeSpace"]["types"][0]["baseline"] = serde_json::json!(9);
    let err = validate_config(&v.to_string()).unwrap_err();
    assert!(err.mentions("typeSpace.types[0].baseline"), "{err}");

    let mut v = serde_json::to_value(deterministic_game(5)).unwrap();
    v["loads"][0]["distribution"] = serde_json::json!([0.7, 0.7]);
    let err = validate_config(&v.to_string()).unwrap_err();
    assert!(err.mentions("loads[0].distribution"), "{err}");

    let mut v = serde_json::to_value(deterministic_game(5)).unwrap();
    v["bogus"] = serde_json::json!(1);
    assert!(validate_config(&v.to_string()).is_err());
}

#[test]
fn shipped_configs_validate() {
    for raw in [
        include_str!("../../../configs/fig2.json"),
        include_str!("../../../configs/deterministic.json"),
        include_str!("../../../configs/small-game-misreport.json"),
    ] {
        validate_config(raw).unwrap();
    }
}
