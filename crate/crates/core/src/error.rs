use thiserror::Error;

/// Errors raised by the model, metrics, manifold and solver layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("transmit power {power:.6e} W exceeds budget {budget:.6e} W")]
    PowerExceeded { power: f64, budget: f64 },

    #[error("retraction produced a degenerate point (norm {0:.3e})")]
    DegenerateStep(f64),

    #[error("gradient batch is empty")]
    EmptyBatch,

    #[error("sample budget must be at least 1")]
    InvalidBudget,

    #[error("invalid solver options: {0}")]
    InvalidOptions(String),

    #[error("function evaluated to a non-finite value at coordinate {0}")]
    NonFiniteEvaluation(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn mismatch(msg: impl Into<String>) -> Error {
    Error::DimensionMismatch(msg.into())
}
