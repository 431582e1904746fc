use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = FftError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FftError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported size: {what} = {size} (must be a power of two)")]
    UnsupportedSize { what: &'static str, size: usize },

    #[error("unsupported decomposition: {0}")]
    UnsupportedDecomposition(String),

    #[error("collective aborted: {0}")]
    Protocol(String),

    #[error("planning failed on candidate {candidate}: {reason}")]
    PlanningFailed { candidate: String, reason: String },

    #[error("timer failure: {0}")]
    Timer(String),

    #[error("wisdom parse error at line {line}: {message}")]
    WisdomParse { line: usize, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl FftError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        FftError::InvalidArgument(msg.into())
    }
}

pub(crate) fn require_pow2(what: &'static str, size: usize) -> Result<()> {
    if size.is_power_of_two() {
        Ok(())
    } else {
        Err(FftError::UnsupportedSize { what, size })
    }
}
