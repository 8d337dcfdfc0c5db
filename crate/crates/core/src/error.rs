use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the steppers, solvers and optimization drivers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("nonlinear solve did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("singular linearization: {0}")]
    SingularLinearization(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("insufficient data: need at least {needed} entries, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("tape mismatch: {0}")]
    TapeMismatch(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
}

/// Failure of an iterative driver that still carries its partial result.
#[derive(Debug, Error)]
pub enum DriverError<P> {
    #[error("maximum number of iterations ({iterations}) exceeded")]
    MaxItersExceeded { iterations: usize, partial: Box<P> },
    #[error("divergence detected at iteration {iteration}: gradient norm {grad_norm:e} exceeds {factor:e} x minimum {min_grad_norm:e}")]
    DivergenceDetected {
        iteration: usize,
        grad_norm: f64,
        min_grad_norm: f64,
        factor: f64,
        partial: Box<P>,
    },
    #[error(transparent)]
    Solver(#[from] Error),
}

impl<P> DriverError<P> {
    /// Partial result, when the driver produced one.
    pub fn partial(&self) -> Option<&P> {
        match self {
            DriverError::MaxItersExceeded { partial, .. }
            | DriverError::DivergenceDetected { partial, .. } => Some(partial),
            DriverError::Solver(_) => None,
        }
    }
}
