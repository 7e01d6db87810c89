use thiserror::Error;

/// Errors raised when an input falls outside an operation's domain.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("latitude {0} outside [-90, 90]")]
    LatitudeOutOfRange(f64),
    #[error("cannot derive a direction from a zero vector")]
    ZeroVector,
    #[error("non-finite value: {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },
    #[error("viewport index {index} out of range for tessellation of {count}")]
    ViewportIndex { index: usize, count: usize },
    #[error("degenerate box: lifted longitude span {span_deg:.3} deg is not below 180 deg")]
    DegenerateBox { span_deg: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
