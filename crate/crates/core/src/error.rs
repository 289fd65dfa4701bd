use thiserror::Error;

/// Errors raised by the geometry kernel, ladder construction and family decoding.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate segment: endpoints coincide")]
    ZeroLengthSegment,
    #[error("undefined endpoint: segment is vertical in the plane")]
    UndefinedEndpoint,
    #[error("invalid segment: length {0} is below 1")]
    InvalidSegment(f64),
    #[error("index {index} out of range for {len} segments")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid family `{name}`: {reason}")]
    InvalidFamily { name: String, reason: String },
    #[error("decode failed: {0}")]
    Decode(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
