use std::path::PathBuf;

use crate::solvers::IterationTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Exhaustive enumeration would exceed the configured guard.
    #[error("instance too large for enumeration: {labelings:.3e} labelings (limit {limit:.0e})")]
    Capacity { labelings: f64, limit: f64 },

    /// A solver produced a non-finite energy. The partial trace is kept for inspection.
    #[error("{method} diverged at iteration {iteration}")]
    Diverged {
        method: String,
        iteration: usize,
        trace: Box<IterationTrace>,
    },

    #[error("decrease bound violated at iteration {iteration}: decrease {decrease:.3e} < bound {bound:.3e}")]
    BoundViolated {
        iteration: usize,
        decrease: f64,
        bound: f64,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported instance file version {0} (expected 1)")]
    UnsupportedVersion(u64),

    #[error("unsupported feature: {0}")]
    Unsupported(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
