//! Domain types shared by every other module: the type space, probability
//! models, cost families, penalty schedules and the experiment configuration.

pub mod config;
pub mod cost;
pub mod demand;
pub mod distribution;
pub mod penalty;
pub mod types;

use rand::Rng;

pub use config::{
    config_schema, validate_config, validate_value, BaselineMode, ConfigError, CurtailmentBounds, ExpectationMethod,
    ExperimentConfig, LoadGroupSpec, UtilityConvention,
};
pub use cost::{eval_cost, CostModel, Entity, GeneratorCost, LoadCostFamily, ReserveCost};
pub use demand::{DemandSampler, NetDemandModel};
pub use distribution::{JointTypeModel, LoadGroup, TypeDistribution, TypeSampler};
pub use penalty::PenaltySchedule;
pub use types::{LoadType, TypeIdx, TypeSpace};

/// The public, static part of the market: everything the operator knows
/// before any report is made.
#[derive(Debug, Clone, PartialEq)]
pub struct System {
    pub type_space: TypeSpace,
    pub net_demand: NetDemandModel,
    pub costs: CostModel,
    pub bounds: CurtailmentBounds,
}

/// One day's realization: net demand and every load's true type.
#[derive(Debug, Clone, PartialEq)]
pub struct DaySample {
    pub z: f64,
    pub types: Vec<TypeIdx>,
}

/// Draws IID days from a product model.
#[derive(Debug, Clone)]
pub struct DaySampler {
    demand: DemandSampler,
    samplers: Vec<TypeSampler>,
    which: Vec<usize>,
}

impl DaySampler {
    pub fn new(net_demand: &NetDemandModel, model: &JointTypeModel) -> Self {
        let groups = model.groups();
        let mut which = vec![0; model.n_loads()];
        for (k, g) in groups.iter().enumerate() {
            for &m in &g.members {
                which[m] = k;
            }
        }
        Self {
            demand: net_demand.sampler(),
            samplers: groups.iter().map(|g| g.distribution.sampler()).collect(),
            which,
        }
    }

    pub fn from_config(config: &ExperimentConfig) -> Self {
        Self::new(&config.net_demand, &config.true_model())
    }

    /// Draws `z` first, then each load's type in load order.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DaySample {
        let z = self.demand.sample(rng);
        let types = self.which.iter().map(|&k| self.samplers[k].sample(rng)).collect();
        DaySample { z, types }
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, types: &mut Vec<TypeIdx>) -> f64 {
        let z = self.demand.sample(rng);
        types.clear();
        types.extend(self.which.iter().map(|&k| self.samplers[k].sample(rng)));
        z
    }
}

/// Draws one day `(z, true types)` from the configuration's models.
pub fn sample_day<R: Rng + ?Sized>(config: &ExperimentConfig, rng: &mut R) -> DaySample {
    DaySampler::from_config(config).sample(rng)
}
