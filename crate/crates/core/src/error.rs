use thiserror::Error;

/// Errors raised by the simulator.
///
/// Check failures are never errors: they are recorded in a
/// [`VerificationReport`](crate::analysis::VerificationReport).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("{what} did not converge within {iterations} iterations")]
    Convergence { what: String, iterations: usize },

    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status for this error: 2 for bad input, 3 for resource,
    /// convergence, internal and I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Argument(_) | Error::Validation(_) | Error::Config(_) => 2,
            Error::Resource(_) | Error::Convergence { .. } | Error::Internal(_) | Error::Io(_) => 3,
        }
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
