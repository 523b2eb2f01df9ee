use std::io;
use std::path::PathBuf;

use fisher_market::MarketError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("invalid instance: {0}")]
    InvariantViolation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("serializing TOML: {0}")]
    Serialize(#[from] toml::ser::Error),

    #[error(transparent)]
    Solver(MarketError),
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(err: serde_path_to_error::Error<toml::de::Error>) -> Self {
        let path = err.path().to_string();
        let inner = err.into_inner();
        Self::Schema {
            path,
            message: inner.message().to_string(),
        }
    }
}

impl From<MarketError> for CliError {
    fn from(err: MarketError) -> Self {
        match err {
            MarketError::InvariantViolation(msg) => Self::InvariantViolation(msg),
            MarketError::InvalidConfig(msg) => Self::Validation(msg),
            other => Self::Solver(other),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
