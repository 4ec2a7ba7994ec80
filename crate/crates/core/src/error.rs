//! Crate-wide error type.

use crate::transport::ThetaError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A numeric argument violated a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An angle failed the admissibility rules.
    #[error(transparent)]
    Theta(#[from] ThetaError),

    /// A run configuration is unusable (e.g. grid step too coarse).
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
