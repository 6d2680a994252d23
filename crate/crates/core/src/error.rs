use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed OFF input. `line` is 1-based.
    #[error("OFF parse error at line {line}: {message}")]
    OffParse { line: usize, message: String },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("mesh is not normalized to the unit cube: {0}")]
    NotNormalized(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Malformed exchange, manifest, grid or CSV content.
    #[error("{context}: line {line}: {message}")]
    Format {
        context: String,
        line: usize,
        message: String,
    },

    #[error("mismatch: {0}")]
    Mismatch(String),

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

    pub(crate) fn format(context: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            context: context.into(),
            line,
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
