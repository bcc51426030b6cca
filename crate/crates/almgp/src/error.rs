use thiserror::Error;

/// Errors shared across the library.
///
/// Numerical routines degrade explicitly: a covariance matrix that stays
/// non-factorizable after jitter escalation is reported as
/// [`AlmgpError::IllConditioned`] rather than silently regularized further.
#[derive(Debug, Error)]
pub enum AlmgpError {
    #[error("{context}: expected dimension {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{0}")]
    EmptyInput(&'static str),

    #[error("invalid design spec: {0}")]
    InvalidDesign(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("matrix ill-conditioned: not factorizable with diagonal jitter up to {max_jitter:e}")]
    IllConditioned { max_jitter: f64 },

    #[error("optimizer diverged: non-finite objective at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("model fit failed: {0}")]
    FitFailure(String),

    #[error("input outside problem domain: {0}")]
    Domain(String),

    #[error("labelling oracle failed: {0}")]
    Oracle(String),

    #[error("checkpoint format: {0}")]
    Checkpoint(String),

    #[error("checkpoint io: {0}")]
    CheckpointIo(#[from] std::io::Error),
}
