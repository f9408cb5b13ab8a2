//! Two-stage demand-response market: a day-ahead stochastic dispatch with
//! VCG payments, real-time curtailment with a second-stage settlement that
//! penalizes reports inconsistent with the day-ahead bids, and a simulator
//! for the resulting repeated game.
//!
//! The crate is organized bottom-up:
//!
//! - [`model`]: type spaces, distributions, cost families, configuration.
//! - [`dispatch`]: real-time and day-ahead optimal dispatch.
//! - [`mechanism`]: payments, deviation statistics, penalties, utilities.
//! - [`agents`]: truthful and adversarial load strategies.
//! - [`engine`]: the day loop and its ledger.
//! - [`benchmark`]: the posted-price baseline.
//! - [`oracle`]: brute-force reference implementations.

pub mod agents;
pub mod benchmark;
pub mod dispatch;
pub mod engine;
pub mod error;
pub mod mechanism;
pub mod model;
pub mod oracle;

pub use agents::{is_truthful, make_strategy, RealTimePolicy, Strategy, StrategySpec};
pub use dispatch::{
    expected_social_cost, solve_day_ahead, solve_day_ahead_excluding, solve_real_time, vcg_inputs, DayAheadDecision,
    Expectation, RealTimeSolution, VcgInputs,
};
pub use engine::{run, DayRecord, RunOptions, SimulationResult, Summary};
pub use error::{Error, Result};
pub use mechanism::{DeviationTracker, PaymentRecord};
pub use model::{
    validate_config, BaselineMode, CostModel, CurtailmentBounds, ExpectationMethod, ExperimentConfig, JointTypeModel,
    LoadType, NetDemandModel, PenaltySchedule, System, TypeDistribution, TypeIdx, TypeSpace,
};
