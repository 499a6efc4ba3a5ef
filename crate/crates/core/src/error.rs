use thiserror::Error;

use crate::expr::{ParseError, TypeError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures from querying a black-box model.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model unavailable: {0}")]
    Unavailable(String),
    #[error("non-binary output {value} at position {index}")]
    NonBinary { index: usize, value: f64 },
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("timed out after {0:?} waiting for the model")]
    Timeout(std::time::Duration),
    #[error("model expects {expected} features, got {got}")]
    Arity { expected: usize, got: usize },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("schema: {0}")]
    Schema(String),
    #[error("data: {0}")]
    Data(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("search space of {count} programs exceeds the limit of {limit}")]
    SpaceTooLarge { count: u128, limit: u128 },
    #[error("conflicting labels: {0}")]
    ConflictingLabels(String),
    #[error("training data has a single class")]
    SingleClass,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
