use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("finite subset must be nonempty")]
    EmptySet,

    #[error("alphabet size {0} is out of range (need 2..=256)")]
    AlphabetSize(usize),

    #[error("invalid probability vector: {0}")]
    InvalidProbVector(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("operation requires a binary alphabet, got size {0}")]
    NotBinary(usize),

    #[error("operation requires a one-dimensional family")]
    NotOneDimensional,

    #[error("symbol {symbol} outside alphabet of size {size}")]
    SymbolOutOfRange { symbol: usize, size: usize },

    #[error("invalid tail pair: {0}")]
    InvalidPair(String),

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("points are not tail-equivalent: {0}")]
    NotEquivalent(String),

    #[error("Radon-Nikodym truncation refused: {0}")]
    RefusedTruncation(String),

    #[error("invalid Markov specification at index {index}: {reason}")]
    InvalidMarkov { index: i64, reason: String },

    #[error("inadmissible path: transition {from}->{to} at index {index} is forbidden")]
    Inadmissible { index: i64, from: usize, to: usize },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
