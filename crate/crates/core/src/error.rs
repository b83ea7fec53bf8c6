use thiserror::Error;

/// Errors raised by the channel, mapping, detection and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Matrix or vector dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// An operation needs at least one (or two) elements and got fewer.
    #[error("empty input: {0}")]
    Empty(String),
    /// An index does not refer to an element of the collection.
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    /// The exhaustive candidate space is larger than the configured bound.
    #[error("candidate space of 2^{bits} frames exceeds the limit of 2^{limit}")]
    CandidateSpaceTooLarge { bits: u32, limit: u32 },
    /// A matrix that has to be inverted is singular.
    #[error("rank-deficient matrix: {0}")]
    RankDeficient(String),
    /// The requested scheme cannot be used with the given alphabet or detector.
    #[error("incompatible configuration: {0}")]
    Incompatible(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
