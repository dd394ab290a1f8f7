use rodsim_core::RodError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlingError {
    #[error(transparent)]
    Rod(#[from] RodError),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("wire has not settled (kinetic energy {kinetic:e} J above {threshold:e} J)")]
    NotSettled { kinetic: f64, threshold: f64 },

    #[error("non-finite policy gradient from batch sample {index}")]
    NonFiniteGradient { index: usize },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for FlingError {
    fn from(e: std::io::Error) -> Self {
        FlingError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for FlingError {
    fn from(e: serde_json::Error) -> Self {
        FlingError::Io(e.to_string())
    }
}

impl From<csv::Error> for FlingError {
    fn from(e: csv::Error) -> Self {
        FlingError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, FlingError>;
