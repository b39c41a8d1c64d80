//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes surfaced by the library; the CLI maps these onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Structurally invalid input: shapes, missing columns, unknown tags.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// Malformed configuration.
    #[error("config error: {0}")]
    Config(String),
    /// A numerical routine lost stability and could not recover.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// An iterative routine exhausted its budget without meeting tolerance.
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
