use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument: dimension mismatch, rank out of range, etc.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// A decomposition kernel failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn argument(msg: impl Into<String>) -> Error {
    Error::Argument(msg.into())
}
