use std::path::PathBuf;

/// Errors raised anywhere in the simulation and estimation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(
        "invalid Zadoff-Chu root u={root} for length K={len} (need 1 <= u < K and gcd(u, K) = 1)"
    )]
    InvalidRoot { root: u64, len: u64 },

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("{field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("grid has no valid beam pairs")]
    EmptyGrid,

    #[error("no in-span multipath component for receiver {receiver} at position p{position}")]
    NoGroundTruth { position: usize, receiver: usize },

    #[error("position p{position}, RX{receiver}: {source}")]
    Context {
        position: usize,
        receiver: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the filesystem rather than by the inputs.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Context { source, .. } => source.is_io(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
