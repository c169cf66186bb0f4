use thiserror::Error;

/// Errors raised by problem construction, solvers and measures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("unsupported pairing: {0}")]
    UnsupportedPairing(String),
    #[error("infeasible point: {0}")]
    Infeasible(String),
    #[error("assumption violated: {0}")]
    Assumption(String),
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("no block solver registered for block {0}")]
    MissingBlockSolver(usize),
    #[error("non-finite value in {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(what: impl Into<String>, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what: what.into(),
            expected,
            got,
        })
    }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
