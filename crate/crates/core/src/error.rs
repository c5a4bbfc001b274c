use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {message}")]
    Parse { context: String, message: String },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("wind rose probabilities sum to {sum}, expected 1")]
    ProbabilitySum { sum: f64 },
    #[error("duplicate wind state (speed {speed} m/s, direction {direction} deg)")]
    DuplicateState { speed: f64, direction: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("enumeration of {combinations} layouts exceeds the budget of {budget}")]
    BudgetExceeded { combinations: u128, budget: u128 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
