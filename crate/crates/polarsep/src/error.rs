//! Crate-wide error type.

/// Errors produced by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input dimensions do not line up.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// An argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A linear system or minimization could not be carried out.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// PFM header is not `PF`/`Pf` followed by dimensions and a scale line.
    #[error("malformed PFM header: {0}")]
    PfmMalformedHeader(String),

    /// PFM dimensions do not fit in memory-safe arithmetic.
    #[error("PFM dimension overflow: {width}x{height}")]
    PfmDimensionOverflow { width: u64, height: u64 },

    /// PFM payload ended before `width * height * channels` floats.
    #[error("truncated PFM payload: expected {expected} bytes, got {actual}")]
    PfmTruncatedPayload { expected: usize, actual: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;
