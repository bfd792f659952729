use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("multiplier is not conjugate-symmetric at mode {index}; cannot produce a real field")]
    SymmetryViolation { index: usize },

    #[error("blowup/instability detected at t = {t} (eps = {eps:?}): {reason}")]
    Blowup { t: f64, eps: Option<f64>, reason: String },

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("sampling mismatch: {0}")]
    SamplingMismatch(String),

    #[error("too few points: {0}")]
    InsufficientData(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
