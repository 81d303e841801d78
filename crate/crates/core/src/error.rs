//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the selection engine.
#[derive(Debug, Error)]
pub enum Error {
    /// A value violated a documented precondition or a type invariant.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A model adapter or persisted round state broke its behavioural contract.
    #[error("contract violation: {0}")]
    ContractViolation(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::ContractViolation(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
