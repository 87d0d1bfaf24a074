use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("elicitation of `{key}` failed: {reason}; set `{key}` in the config to override")]
    Elicitation { key: &'static str, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error("sampler diagnostic at iteration {iteration}: {message}")]
    Sampler { iteration: usize, message: String },

    #[error("schema mismatch: {0}")]
    Schema(String),
}

impl Error {
    /// Short machine-readable category used for CLI exit lines.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::InvalidInput(_) => "invalid-input",
            Error::Elicitation { .. } => "elicitation",
            Error::Config(_) => "config",
            Error::Sampler { .. } => "sampler",
            Error::Schema(_) => "schema",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
