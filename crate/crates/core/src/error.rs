use thiserror::Error;

pub use crate::model::config::ConfigError;

/// Errors raised by the solvers, the mechanism and the simulation engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("cost evaluation: {0}")]
    Cost(String),

    #[error("unsupported cost family: {0}")]
    UnsupportedFamily(String),

    #[error("enumeration bound exceeded: {what} needs {count} points (limit {limit})")]
    TooLarge { what: &'static str, count: f64, limit: f64 },

    #[error("index {index} out of range for {len} loads")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("unknown type id `{0}`")]
    UnknownType(String),

    #[error("strategy: {0}")]
    Strategy(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("ledger integrity: {0}")]
    Integrity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
