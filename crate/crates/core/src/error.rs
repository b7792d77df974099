use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("circulant embedding failed: min spectral value {min:e} below -{tol:e} (relative)")]
    EmbeddingFailure { min: f64, tol: f64 },

    #[error("integration failed at step {step} (t = {t}): non-finite state")]
    IntegrationFailure { step: usize, t: f64 },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("fixed point did not converge after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl SpectralError {
    /// Process exit code for the CLI: 2 for configuration problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            SpectralError::Config(_) | SpectralError::Io(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, SpectralError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(SpectralError::Domain(msg.into()))
}
