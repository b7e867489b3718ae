use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("matrix is singular within tolerance")]
    SingularMatrix,
    #[error("shape mismatch: {0}")]
    ShapeError(String),
    #[error("projection failed to converge (column {column})")]
    ConvergenceFailure { column: usize, best: Vec<f64> },
    #[error("anchor point is infeasible: {0}")]
    AnchorInfeasible(String),
    #[error("instance too large for the enumeration oracle (n <= 8, m <= 16)")]
    OracleTooLarge,
    #[error("optimal solution carries no dual certificate")]
    MissingCertificate,
    #[error("problem is infeasible")]
    Infeasible,
    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    ConfigError(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
