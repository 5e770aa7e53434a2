use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive semi-definite (quadratic form {value:e})")]
    NotPsd { value: f64 },

    #[error("matrix is not symmetric (entry ({row}, {col}) differs by {diff:e})")]
    NotSymmetric { row: usize, col: usize, diff: f64 },

    #[error("oracle matrix violates the distortion sandwich for eta = {eta} on probe {probe}")]
    SandwichViolated { eta: f64, probe: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("duplicate points {first} and {second} in function class")]
    DuplicatePoints { first: usize, second: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("insufficient samples for confidence: need at least {needed} blocks, have {available} samples")]
    InsufficientSamples { needed: usize, available: usize },

    #[error("confidence {delta:e} below admissible floor {floor:e} for {n} samples")]
    DeltaBelowFloor { delta: f64, floor: f64, n: usize },

    #[error("trimming {trim} from each side removes all {n} samples")]
    TrimTooLarge { trim: usize, n: usize },

    #[error(
        "entropy condition fails: {what} has {count} cells, log {log_count:.3} exceeds budget {budget:.3}; try a larger r"
    )]
    EntropyCondition {
        what: &'static str,
        count: usize,
        log_count: f64,
        budget: f64,
    },

    #[error("no admissible chaining level: need 2^s * alpha <= c0 * N, alpha = {alpha}, N = {n}")]
    NoAdmissibleLevel { alpha: f64, n: usize },

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error at {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json error at {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("plot error at {path}: {message}")]
    Plot { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
