use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by samplers, integrators, and the experiment runner.
#[derive(Debug, Error)]
pub enum SgpError {
    /// An argument lies outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A time lies beyond the range an object was built for.
    #[error("range error: {0}")]
    Range(String),

    /// An iterative or linear-algebra routine failed.
    #[error("numeric error: {message} (residual {residual:e})")]
    Numeric { message: String, residual: f64 },

    /// A run aborted at a given optimizer time.
    #[error("run failed at t = {time}: {source}")]
    RunFailed {
        time: f64,
        #[source]
        source: Box<SgpError>,
    },

    #[error("division error: {0}")]
    Division(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error at {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, SgpError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(SgpError::Domain(msg.into()))
}
