use thiserror::Error;

#[derive(Debug, Error)]
pub enum RpcaError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: String,
        expected: String,
        got: String,
    },
    #[error("invalid mode {0}: expected 1, 2 or 3")]
    InvalidMode(usize),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("singular {0} system")]
    Singular(String),
    #[error("non-finite tensor entry")]
    NonFinite,
    #[error("malformed tensor file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] ncopt::Error),
}

pub type Result<T> = std::result::Result<T, RpcaError>;

pub(crate) fn mismatch(what: impl Into<String>, expected: impl ToString, got: impl ToString) -> RpcaError {
    RpcaError::DimensionMismatch {
        what: what.into(),
        expected: expected.to_string(),
        got: got.to_string(),
    }
}

pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> RpcaError {
    RpcaError::InvalidParameter {
        name: name.into(),
        reason: reason.into(),
    }
}
