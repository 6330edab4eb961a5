use std::path::PathBuf;

use thiserror::Error;

use crate::solvers::IterationRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NotConverged { sweeps: usize, off_norm: f64 },

    #[error("capacity exceeded: requested {requested}, only {available} available")]
    Capacity { requested: u64, available: u64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("matrix is not Hermitian (residue {residue:e} exceeds {tolerance:e})")]
    NotHermitian { residue: f64, tolerance: f64 },

    #[error("degenerate state: trace {trace:e} is too small to normalize")]
    DegenerateState { trace: f64 },

    #[error("iteration diverged at step {iteration}: {reason}")]
    Divergence {
        iteration: usize,
        reason: String,
        history: Vec<IterationRecord>,
    },

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("invalid experiment spec: {0}")]
    Spec(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
