use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("lookup table has no entry for {0}")]
    LutMiss(String),

    #[error("unknown endpoint `{0}`")]
    UnknownEndpoint(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("accuracy oracle has no entry for architecture {0}")]
    OracleMiss(String),

    #[error("sampling exhausted: {0}")]
    SamplingExhausted(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("stale artifact `{name}` at {path}: {reason}")]
    Stale {
        name: String,
        path: PathBuf,
        reason: String,
    },

    #[error("search infeasible: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
