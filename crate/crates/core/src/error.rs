use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("gaussian approximation invalid: {0}")]
    GaussianInvalid(String),

    #[error("inverted index range: lower {lower} > upper {upper}")]
    InvertedRange { lower: i128, upper: i128 },

    #[error("input length {got} does not match expected {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("round index {index} outside [0, {m})")]
    RoundIndex { index: usize, m: usize },

    #[error("no solution: {0}")]
    NoSolution(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
