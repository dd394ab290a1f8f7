use thiserror::Error;

/// Errors raised by the rod model and its integrator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum RodError {
    #[error("degenerate parallel transport: tangents are antiparallel")]
    DegenerateTransport,

    #[error("kink at vertex {vertex}: adjacent edges are antiparallel")]
    Kink { vertex: usize },

    #[error("degenerate edge {edge}: length {length:e} is below the admissible minimum")]
    DegenerateEdge { edge: usize, length: f64 },

    #[error("invalid rod: {0}")]
    InvalidRod(String),

    #[error("singular material-frame system (twisting modulus must be positive)")]
    SingularTwistSystem,

    #[error("inextensibility projection did not converge after {iterations} iterations (worst relative residual {residual:e})")]
    ConstraintNotConverged { iterations: usize, residual: f64 },

    #[error("simulation diverged at step {step} (t = {time:.4} s): {reason}")]
    Diverged {
        step: u64,
        time: f64,
        reason: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for RodError {
    fn from(e: std::io::Error) -> Self {
        RodError::Io(e.to_string())
    }
}

impl From<csv::Error> for RodError {
    fn from(e: csv::Error) -> Self {
        RodError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, RodError>;
