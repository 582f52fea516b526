use std::path::PathBuf;

/// Errors produced by the beamforming library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular matrix: eigenvalue ratio {ratio:e} below cutoff {cutoff:e}")]
    Singular { ratio: f64, cutoff: f64 },

    #[error("matrix is not positive definite ({0}); use the general propagation formula")]
    NotPositiveDefinite(String),

    #[error("uncertainty set infeasible: center^H E center = {margin} must exceed 1")]
    Infeasible { margin: f64 },

    #[error("propagated reduced-dimension set infeasible: b^H F b = {margin} must exceed 1")]
    PropagatedInfeasible { margin: f64 },

    #[error("multiplier equation has no positive root: h(0) = {h0} must exceed 1")]
    NoRoot { h0: f64 },

    #[error("root search did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("numerical breakdown: {0}")]
    Breakdown(String),

    #[error("invalid reducer: {0}")]
    InvalidReducer(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
