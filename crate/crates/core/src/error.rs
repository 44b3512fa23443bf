use thiserror::Error;

/// Errors produced by the rotation, eigen, and learning routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The minimum eigenvalue is not simple, so the solution rotation is not unique.
    #[error("degenerate minimum eigenspace: eigengap {gap:e} below threshold {threshold:e}")]
    DegenerateEigenspace { gap: f64, threshold: f64 },

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("degenerate 6D input: {0}")]
    DegenerateSixD(&'static str),

    #[error("vector norm {0:e} too small to normalize")]
    NearZeroNorm(f64),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("mean undefined: sum of aligned quaternions has norm {0:e}")]
    MeanUndefined(f64),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
