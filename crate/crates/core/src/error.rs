use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Broken internal state, e.g. a corrupt mesh producing a nonpositive lumped mass.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    CgNotConverged { iterations: usize, residual: f64 },

    #[error("solution diverged (non-finite value) at step {step}")]
    Divergence { step: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
