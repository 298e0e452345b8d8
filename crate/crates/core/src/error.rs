use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument falls outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The operation is not defined for this lattice boundary or model.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// An internal invariant broke during a run. Always a bug or a bad rule.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    /// A coupling kernel whose marginals do not reproduce the base chain.
    #[error("invalid coupling: {0}")]
    InvalidCoupling(String),

    /// A unique object was requested but several exist.
    #[error("expected a unique invariant measure, found {0} recurrent classes")]
    NotUnique(usize),

    /// A precondition on the inputs does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// Malformed text input. `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
