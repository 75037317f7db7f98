use thiserror::Error;

/// Unified error type for the crate.
///
/// Variants are grouped by origin: input validation, numerical failures
/// detected mid-computation, structural check failures that carry a witness,
/// and I/O or format problems.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A configuration file or parameter set is unusable.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numerical routine produced NaN, failed to converge, or met an
    /// out-of-range eigenvalue.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A structural invariant that the caller asked to verify does not hold.
    /// The message names the witness (simplex, pair, or probe point).
    #[error("check failed: {0}")]
    CheckFailed(String),

    /// An input exceeds a documented size cap.
    #[error("size cap exceeded: {0}")]
    SizeCap(String),

    /// Binary or text artifact does not match the expected format.
    #[error("format error: {0}")]
    Format(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn check(msg: impl Into<String>) -> Self {
        Error::CheckFailed(msg.into())
    }

    pub fn size_cap(msg: impl Into<String>) -> Self {
        Error::SizeCap(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
