use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violates the operation's preconditions.
    #[error("domain error: {0}")]
    Domain(String),
    /// A numerical routine produced or received a non-finite value.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// Malformed configuration file.
    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
