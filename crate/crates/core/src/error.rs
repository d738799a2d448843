use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Correlation functions are undefined at zero mean photon number.
    #[error("zero intensity: G1 = 0, normalized correlations are undefined")]
    ZeroIntensity,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("truncation error: dim {dim} leaves tail {tail:e} above budget {budget:e}")]
    Truncation { dim: usize, tail: f64, budget: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParams(msg.into())
}
