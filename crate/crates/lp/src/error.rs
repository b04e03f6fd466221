use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("simplex iteration limit of {0} exceeded")]
    IterationLimit(usize),
    #[error("basis matrix is numerically singular")]
    SingularBasis,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
