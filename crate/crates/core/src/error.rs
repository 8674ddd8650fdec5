use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum HawkesError {
    #[error("invalid event sequence: {0}")]
    InvalidSequence(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite log-likelihood: intensity {value} at event {index} (dim {dim})")]
    NonFiniteLikelihood { index: usize, dim: usize, value: f64 },

    #[error("simulation exceeded event cap of {cap} events (supercritical parameters?)")]
    SimulationCapExceeded { cap: usize },

    #[error("ground truth has no positive weight")]
    DegenerateTruth,

    #[error("train/test split leaves the {side} side empty")]
    EmptySplit { side: &'static str },

    #[error("{path}:{line}: parse error: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("{path}: validation error: {msg}")]
    Validation { path: PathBuf, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = HawkesError> = std::result::Result<T, E>;
