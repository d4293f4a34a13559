use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {path} at {location}: {message}")]
    Parse { path: PathBuf, location: String, message: String },

    #[error("structural error: {0}")]
    Structural(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("domain error: pixel ({row}, {col}) has value {value}, expected >= 0")]
    Domain { row: usize, col: usize, value: f64 },

    #[error("invalid noise model: {0}")]
    Model(String),

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    /// True for errors caused by bad input data rather than bad configuration.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Parse { .. } | Error::Structural(_) | Error::Domain { .. } | Error::Io(_) | Error::Csv(_))
    }
}
