use std::fmt;

/// Failure of a CLI command, carrying its exit code class.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Unreadable or malformed input; exit code 2.
    Input(String),
    /// Parameter or assumption violation; exit code 3.
    Violation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Violation(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Violation(m) => write!(f, "violation: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ncopt::Error> for CliError {
    fn from(e: ncopt::Error) -> Self {
        match e {
            ncopt::Error::DimensionMismatch { .. } | ncopt::Error::NonFinite(_) => CliError::Input(e.to_string()),
            _ => CliError::Violation(e.to_string()),
        }
    }
}

impl From<ncopt_rpca::RpcaError> for CliError {
    fn from(e: ncopt_rpca::RpcaError) -> Self {
        use ncopt_rpca::RpcaError as E;
        match e {
            E::Core(c) => c.into(),
            E::InvalidParameter { .. } | E::InvalidMode(_) | E::Singular(_) => CliError::Violation(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
