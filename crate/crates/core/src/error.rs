use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("singularity: {0}")]
    Singularity(String),
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("integration error at t={t} us: {reason}")]
    Integration { t: f64, reason: String },
    #[error("fit error ({reason}), residual norm {residual}")]
    Fit { reason: String, residual: f64 },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("post-selection accepted no weight at cycle {cycle}")]
    DegeneratePostselection { cycle: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Config { field: field.into(), reason: reason.into() }
}
