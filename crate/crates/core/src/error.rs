use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or incompatible shapes requested by the caller.
    #[error("configuration error: {0}")]
    Config(String),

    /// A documented precondition of an operation was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Input outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("scene generation failed: {0}")]
    Generation(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("sampling diverged at step {step}: {reason}")]
    Sampling { step: usize, reason: String },

    #[error("training aborted at step {step}: {reason}")]
    Training { step: usize, reason: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("failed to load {path}: {reason}")]
    Load { path: PathBuf, reason: String },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Short machine-readable tag used by the command-line error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Contract(_) => "contract",
            Error::Domain(_) => "domain",
            Error::Generation(_) => "generation",
            Error::Estimation(_) => "estimation",
            Error::Sampling { .. } => "sampling",
            Error::Training { .. } => "training",
            Error::Checkpoint(_) => "checkpoint",
            Error::Load { .. } => "load",
            Error::Dataset(_) => "dataset",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub(crate) fn load_err(path: impl Into<PathBuf>, reason: impl ToString) -> Error {
    Error::Load { path: path.into(), reason: reason.to_string() }
}
