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

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("header mismatch in {path}: expected column {expected:?}")]
    Header { path: PathBuf, expected: String },

    #[error("row {row}: malformed {field} value {value:?}")]
    Malformed {
        row: usize,
        field: &'static str,
        value: String,
    },

    #[error("row {row}: {field} value {value} outside [{lo}, {hi}]")]
    OutOfRange {
        row: usize,
        field: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("unknown disease code {0:?}")]
    UnknownDisease(String),

    #[error("unknown {field} category {value:?}")]
    UnknownCategory { field: &'static str, value: String },

    #[error("invalid trajectory for {patient_id}: {reason}")]
    InvalidTrajectory { patient_id: String, reason: String },

    #[error("invalid archetype {name:?}: {reason}")]
    InvalidArchetype { name: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("unknown linkage {0:?}")]
    UnknownLinkage(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
