use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed exchange log: {0}")]
    MalformedLog(String),

    #[error("degenerate channel: zero-magnitude packets at counters {counters:?}")]
    DegenerateChannel { counters: Vec<u64> },

    #[error("degenerate profile: {0}")]
    DegenerateProfile(String),

    #[error("resource limit: steering table needs {required} bytes, budget is {budget} bytes; lower the grid resolution or sub-sample packets")]
    ResourceLimit { required: u64, budget: u64 },

    #[error("singular geometry: {0}")]
    SingularGeometry(String),

    #[error("insufficient observations: {used} usable, at least 2 required")]
    InsufficientObservations { used: usize },

    #[error("degenerate geometry: normal matrix condition number {condition:.3e} exceeds {limit:.0e}")]
    DegenerateGeometry { condition: f64, limit: f64 },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("validation error in {path}: {message}")]
    Validation { path: PathBuf, message: String },

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

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
