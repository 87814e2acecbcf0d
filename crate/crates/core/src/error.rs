use thiserror::Error;

/// Errors raised by the optimisation core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed caller input (dimensions, bounds, indices, non-finite values).
    #[error("invalid input: {0}")]
    Input(String),
    /// A linear-algebra step failed even after jitter escalation.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// A practitioner callback could not produce a selection.
    #[error("selector failed: {0}")]
    Selector(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<S: Into<String>>(msg: S) -> Error {
    Error::Input(msg.into())
}
