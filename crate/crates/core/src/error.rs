use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("fold `{0}` is empty")]
    EmptyFold(&'static str),

    #[error("zero variance: {0}")]
    ZeroVariance(String),

    #[error("too few values: need at least {needed}, got {got}")]
    TooFewValues { needed: usize, got: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("data error at row {row}, field `{field}`: {message}")]
    Data {
        row: usize,
        field: String,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("output directory {} is not empty (use --force to overwrite)", .0.display())]
    OutputCollision(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
