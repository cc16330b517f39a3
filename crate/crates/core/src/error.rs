use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("support size {n_p} out of range for mask length {n}")]
    SupportOutOfRange { n: usize, n_p: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("unknown threshold label `{0}`")]
    UnknownThreshold(String),

    #[error("band is not conjugate-symmetric at bin {0}")]
    AsymmetricBand(usize),

    #[error("malformed mask text: {0}")]
    MaskFormat(String),

    #[error("experiment aborted: {0}")]
    Experiment(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
