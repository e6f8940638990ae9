use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: `{field}` {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("all scales dropped from the partition sums")]
    AllScalesDropped,

    #[error("refusing to overwrite existing output in {0} (use --force)")]
    Clobber(PathBuf),

    #[error("sweep failed at alpha={alpha}: {failed} of {total} realizations failed")]
    SweepFailed {
        alpha: f64,
        failed: usize,
        total: usize,
    },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by user-supplied configuration rather than runtime failure.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::InvalidConfig { .. } | Error::Parse(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
