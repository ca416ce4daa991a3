use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("ingestion error in {}: {msg}", path.display())]
    Ingest { path: PathBuf, msg: String },

    #[error("domain `{0}` has no windows")]
    EmptyDomain(String),

    #[error("class `{class}` has {count} windows; a stratified split needs at least 3")]
    Stratification { class: String, count: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("rotation needs 3 channels, got {0}")]
    UnsupportedChannels(usize),

    #[error("degenerate batch: {0}")]
    DegenerateBatch(String),

    #[error("non-finite {component} at {location}")]
    NonFinite { component: String, location: String },

    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error("{failed} of {total} suite cells failed")]
    PartialFailure { failed: usize, total: usize },

    #[error("malformed file {}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn non_finite(component: impl Into<String>, location: impl Into<String>) -> Self {
        Error::NonFinite {
            component: component.into(),
            location: location.into(),
        }
    }

    /// Process exit code for the command-line front end: 1 for configuration
    /// problems, 3 for numeric aborts, 2 for everything data related.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::NonFinite { .. } => 3,
            _ => 2,
        }
    }
}
