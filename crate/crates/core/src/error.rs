use thiserror::Error;

/// Crate-wide error type. The CLI maps `Config` to exit code 2 and the
/// numerical/contract family to exit code 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate conditioning: {0}")]
    DegenerateConditioning(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// Exit code the CLI reports for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io(_) => 2,
            Error::Numerical(_) | Error::Contract(_) | Error::DegenerateConditioning(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
