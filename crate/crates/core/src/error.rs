use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("integral diverges: {0}")]
    Divergent(String),

    #[error("quadrature budget exhausted (partial value {partial}, error estimate {error})")]
    BudgetExceeded { partial: f64, error: f64 },

    #[error("unsupported kernel: {0}")]
    UnsupportedKernel(String),

    #[error("initial data does not satisfy the hypotheses: {0}")]
    InvalidInitialData(String),

    #[error("lattice cannot capture the requested Dalang mass: {0}")]
    CannotCapture(String),

    #[error("Picard iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("grid lacks the light-cone margin: {0}")]
    ConeViolation(String),

    #[error("insufficient samples: {got} given, at least {needed} required")]
    InsufficientSamples { got: usize, needed: usize },

    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
