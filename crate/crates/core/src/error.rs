//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input data. `line` is 1-based when known.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}: row {row}, column {column}: {message}")]
    Cell {
        path: String,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("invalid data: {0}")]
    Data(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dense kernel matrix of size {n} exceeds the guard of {limit} points")]
    TooLarge { n: usize, limit: usize },

    #[error("fast summation windows support at most 3 dimensions, got {0}")]
    WindowTooLarge(usize),

    /// A prediction target fell outside the torus ball the plan was built for.
    #[error("{count} target point(s) outside the fast summation domain (max scaled radius {radius:.4} > {limit:.4})")]
    TargetOutOfDomain {
        count: usize,
        radius: f64,
        limit: f64,
    },

    #[error("operator is not positive semidefinite: residual diagonal {value:e} at index {index}")]
    NotPositiveSemidefinite { index: usize, value: f64 },

    #[error("capacitance matrix is numerically singular")]
    SingularCapacitance,

    #[error("interior point iteration stalled after {iterations} iterations")]
    Stalled { iterations: usize },

    #[error("model file: {0}")]
    Model(String),

    #[error("all {trials} tuning trials stalled")]
    AllTrialsStalled {
        trials: usize,
        log: Vec<crate::tuning::TrialRecord>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
