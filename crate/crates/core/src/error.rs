use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A caller broke an operation's precondition, e.g. passed an infeasible parameter.
    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("scaling matrix is singular at coordinate {coordinate} (|mu| = 1)")]
    Singularity { coordinate: usize },

    #[error("enumeration needs {terms} weighted terms, above the limit of {limit}")]
    ResourceLimit { terms: u128, limit: u128 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
