use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse failure category, used by front ends to choose an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Numerical,
    ClassInapplicable,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate density: {0}")]
    DegenerateDensity(String),

    #[error("minimality violated: {0}")]
    MinimalityViolated(String),

    #[error("density is not regular ({clamped} of {total} samples at the floor)")]
    NotRegular { clamped: usize, total: usize },

    #[error("factorization did not converge (relative residual {residual:.3e})")]
    FactorizationNotConverged { residual: f64 },

    #[error("index {index} exceeds truncation {truncation}")]
    TruncationRange { index: usize, truncation: usize },

    #[error("eigen solver failed (residual {residual:.3e})")]
    EigenFailure { residual: f64 },

    #[error("matrix is not positive definite or is ill-conditioned (condition estimate {condition:.3e})")]
    Conditioning { condition: f64 },

    #[error("functional is not summable at order {order}: tail {tail:.3e}, order {required} required")]
    IllPosedFunctional { order: usize, tail: f64, required: usize },

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("class inapplicable: {0}")]
    ClassInapplicable(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    #[error("contract violation: {0}")]
    Contract(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidInput(_) | Error::Unsupported(_) | Error::Contract(_) => ErrorKind::Input,
            Error::ClassInapplicable(_) => ErrorKind::ClassInapplicable,
            _ => ErrorKind::Numerical,
        }
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
