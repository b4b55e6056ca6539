use thiserror::Error;

/// Failure classes surfaced by every solver in the crate.
///
/// The three variants map onto distinct process exit codes in the CLI:
/// configuration problems are the caller's fault, domain errors mean the
/// requested object does not exist for the given parameters, and solver
/// failures mean the numerics did not deliver an accepted answer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AtlasError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("solver failure: {0}")]
    Solver(String),
}

impl AtlasError {
    pub fn config(msg: impl Into<String>) -> Self {
        AtlasError::Config(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        AtlasError::Domain(msg.into())
    }

    pub fn solver(msg: impl Into<String>) -> Self {
        AtlasError::Solver(msg.into())
    }

    pub fn is_config(&self) -> bool {
        matches!(self, AtlasError::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, AtlasError>;
