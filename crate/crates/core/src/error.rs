use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("index out of range: {what} = {index} (limit {limit})")]
    Index {
        what: &'static str,
        index: usize,
        limit: usize,
    },
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("policy kind not supported here: {0}")]
    UnsupportedPolicy(&'static str),
    #[error("chain has {classes} recurrent classes; stationary distribution is not unique")]
    NonUniqueStationary { classes: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("value outside domain: {0}")]
    Domain(String),
    #[error("not enough data: {0}")]
    InsufficientData(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("non-positive return encountered")]
    UndefinedGrowth,
    #[error("learner diverged: {0}")]
    Diverged(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
