use thiserror::Error;

/// Failure modes shared by every module of the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numeric domain violation: {0}")]
    NumericDomain(String),
    #[error("quadrature did not converge: {0}")]
    NumericConvergence(String),
    #[error("{what} = {value} lies outside the tabulated range [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("not integrable: {0}")]
    NotIntegrable(String),
    #[error("step failure at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
