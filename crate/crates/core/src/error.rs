use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown symbol {symbol:?} at position {position}")]
    UnknownSymbol { position: usize, symbol: char },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("non-finite value in {0}")]
    NonFiniteInput(&'static str),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("search space of {size} sequences exceeds the cap of {cap}")]
    TooLarge { size: f64, cap: u64 },

    #[error("parse error at {location}: {message}")]
    ParseError { location: String, message: String },

    #[error("shape error: expected {expected}, got {got}")]
    ShapeError { expected: String, got: String },

    #[error("unknown layer {0:?}")]
    UnknownLayer(String),

    #[error("survival probability underflowed (value capped at {value})")]
    NumericUnderflow {
        value: f64,
        d_mean: f64,
        d_std: f64,
    },

    #[error("invalid value for {field}: {reason}")]
    ValidationError { field: String, reason: String },

    #[error("unknown configuration key {0:?}")]
    UnknownKey(String),

    #[error("configuration error at {field}: {reason}")]
    ConfigError { field: String, reason: String },

    #[error("i/o error on {path}: {source}")]
    IoError {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dims(expected: impl ToString, got: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::IoError {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by a bad configuration or input file rather
    /// than a failure while running.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::ParseError { .. }
                | Error::ValidationError { .. }
                | Error::UnknownKey(_)
                | Error::ConfigError { .. }
                | Error::ShapeError { .. }
                | Error::UnknownSymbol { .. }
        )
    }
}
