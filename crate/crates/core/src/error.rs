use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    /// The hazard process is only defined strictly before the first zero of Z.
    #[error("domain error at t = {t}: {reason}")]
    Domain { t: f64, reason: String },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("decomposition inconsistent: {0}")]
    DecompositionInconsistent(String),

    #[error("singular normal equations at step {step} (condition number {condition:e})")]
    Singular { step: usize, condition: f64 },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl LabError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        LabError::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
