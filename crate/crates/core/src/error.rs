use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("history holds {0} entries, at least 2 are needed to form differences")]
    EmptyHistory(usize),

    #[error("lag {lag} outside 1..={depth}")]
    LagOutOfRange { lag: usize, depth: usize },

    #[error("non-finite values passed to {0}")]
    NonFinite(&'static str),

    #[error("gradient vanished, the iterate is already stationary")]
    Converged,

    #[error("iteration {k} diverged: {reason}")]
    Diverged { k: usize, reason: &'static str },

    #[error("mass {mass} at t = {t} is below the floor {floor}")]
    MassBelowFloor { t: f64, mass: f64, floor: f64 },

    #[error("trajectory covers [{start}, {end}] but t = {requested} was requested")]
    CoverageGap { start: f64, end: f64, requested: f64 },

    #[error("trace has no AA diagnostics to build schedules from")]
    EmptyTrace,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: malformed record: {reason}")]
    Malformed { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
