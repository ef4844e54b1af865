use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported cumulant order {0} (at most 8)")]
    UnsupportedOrder(usize),
    #[error("numerical failure in {what}: achieved tolerance {achieved:e}")]
    Numerical { what: String, achieved: f64 },
    #[error("size budget exceeded: {0}")]
    Size(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
