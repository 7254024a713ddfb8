use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the simulation, analysis and orchestration layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters or out-of-range indices.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller violated an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// An eigensolve or other numerical kernel failed or lost accuracy.
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// The requested problem exceeds the dense-memory budget.
    #[error("resource limit: {0}")]
    Resource(String),

    /// A crossing or root was not bracketed by the supplied data.
    #[error("range error: {0}")]
    Range(String),

    /// Too few samples for a meaningful statistic.
    #[error("statistical floor not met: {got} samples, need at least {need}")]
    Statistical { got: usize, need: usize },

    /// Least-squares fit could not be performed.
    #[error("fit error: {0}")]
    Fit(String),

    /// A requested output artifact is not present in the run record.
    #[error("artifact not found: {0}")]
    NotFound(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
