//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    InvalidInput {
        path: String,
        line: u64,
        message: String,
    },

    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    #[error("attribute `{attr}` has {actual} categories, expected {expected}")]
    SchemaMismatch {
        attr: String,
        expected: usize,
        actual: usize,
    },

    #[error("graphs do not share node count / schema: {0}")]
    GraphMismatch(String),

    #[error("invalid release spec: {0}")]
    InvalidReleaseSpec(String),

    #[error("invalid model spec: {0}")]
    InvalidModelSpec(String),

    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),

    #[error("invalid experiment plan: {0}")]
    InvalidPlan(String),

    #[error("unbalanced design: expected {expected} observations, got {actual}")]
    UnbalancedDesign { expected: usize, actual: usize },

    #[error("io error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on `{path}`: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid_input(path: impl Into<String>, line: u64, message: impl Into<String>) -> Self {
        Error::InvalidInput {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
