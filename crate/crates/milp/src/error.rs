use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("simplex iteration limit ({0}) exceeded")]
    IterationLimit(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
}
