use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: String, actual: String },

    #[error("value iteration did not reach certificate {target:e} within {iterations} iterations (last certificate {last_certificate:e})")]
    NonConvergence {
        target: f64,
        iterations: u64,
        last_certificate: f64,
    },

    /// Reward search exhausted its budget. Carries the closest candidate seen.
    #[error("no reward with gap within tolerance of {target} after {attempts} attempts (best gap {best_delta})")]
    SearchFailure {
        target: f64,
        attempts: u64,
        best_delta: f64,
        best_seed: u64,
    },

    /// The lemma's denominator `1 - gamma * L_p * (1 + L_pi)` is not positive.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("content hash mismatch: stored {stored}, computed {computed}")]
    Corruption { stored: String, computed: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_)
            | Error::Dimension { .. }
            | Error::Domain(_)
            | Error::Corruption { .. }
            | Error::Format(_) => 2,
            Error::NonConvergence { .. } | Error::SearchFailure { .. } => 3,
            Error::Io { .. } => 4,
        }
    }
}
