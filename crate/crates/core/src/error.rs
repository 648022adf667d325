use std::path::PathBuf;

/// Errors raised across the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("validation error in `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("unknown lane id {0}")]
    UnknownLane(u32),

    #[error("context error: {0}")]
    Context(String),

    #[error("trajectory synthesis error: {0}")]
    Synthesis(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("distance profile error: {0}")]
    Profile(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
