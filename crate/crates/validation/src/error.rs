use rodsim_core::RodError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error(transparent)]
    Rod(#[from] RodError),

    #[error("rod did not buckle (maximal tangent deviation {phi0:.4} rad)")]
    NotBuckled { phi0: f64 },

    #[error("ring stayed planar up to a twist of {max_twist:.4} rad")]
    NoRingBuckling { max_twist: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for ValidationError {
    fn from(e: std::io::Error) -> Self {
        ValidationError::Io(e.to_string())
    }
}

impl From<csv::Error> for ValidationError {
    fn from(e: csv::Error) -> Self {
        ValidationError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, ValidationError>;
