use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// A coefficient sequence fails the positivity or summability requirements.
    #[error("assumption violation: {0}")]
    AssumptionViolation(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// The requested set is not bounded away from the removed cone.
    #[error("infinite mass: {0}")]
    InfiniteMass(String),
}

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
