use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// An iterative numerical procedure did not reach its tolerance.
    #[error("numerical failure: {0}")]
    Numeric(String),
    /// A moment that the operation needs does not exist for these parameters.
    #[error("moment does not exist: {0}")]
    NonexistentMoment(String),
    /// Fewer observations than unknowns.
    #[error("underdetermined least-squares problem: {0}")]
    Underdetermined(String),
    /// The design matrix is rank deficient or too badly conditioned.
    #[error("ill-conditioned design: {0}")]
    Conditioning(String),
    /// The data carry no information to fit a distribution (e.g. zero spread).
    #[error("degenerate data: {0}")]
    Degenerate(String),
    /// Requested a feature that is not provided.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// A constrained optimizer could not find a feasible starting point.
    #[error("feasibility restoration failed: {0}")]
    Infeasible(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Config(e.to_string())
    }
}
