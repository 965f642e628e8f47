use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("derivative order {0} is not supported (expected 0..=3)")]
    InvalidOrder(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionError { expected: usize, got: usize },

    #[error("quadrature did not converge (last deviation {deviation:e})")]
    QuadratureError { deviation: f64 },

    #[error("invalid quadrature specification: {0}")]
    InvalidQuadrature(String),

    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),

    #[error("all observations trimmed")]
    AllTrimmed,

    #[error("observation {0} lies in the trim region but has zero local kernel mass")]
    DegenerateDenominator(usize),

    #[error("at least 2 replications are required, got {0}")]
    InsufficientReplications(usize),

    #[error("log of non-positive value {value} at position {index}")]
    LogDomainError { index: usize, value: f64 },

    #[error("evaluation grid error: {0}")]
    GridError(String),

    #[error("configuration error: {0}")]
    ConfigError(String),

    #[error("invalid data at line {line}: {message}")]
    InvalidData { line: u64, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("simulation truth (m, eps) is required for this operation")]
    MissingTruth,

    #[error("{degenerate} of {total} replications were degenerate (limit 10%)")]
    TooManyDegenerate { degenerate: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
