use thiserror::Error;

/// Errors raised by the wavelet-zoom pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch { left: String, right: String },

    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },

    #[error("imaginary residue {residue:e} exceeds tolerance after inverse transform")]
    ImaginaryResidue { residue: f64 },

    #[error("closed-loop denominator vanishes at lambda = {lambda}")]
    SingularDenominator { lambda: f64 },

    #[error("configuration is not exponentially stable (margin {margin:e})")]
    Unstable { margin: f64 },

    #[error(
        "linear system is singular or ill-conditioned (reciprocal condition estimate {rcond:e})"
    )]
    IllConditioned { rcond: f64 },

    #[error("eigensolver failed: {0}")]
    Solver(String),

    #[error("state exceeded overflow guard at t = {t}")]
    Overflow { t: f64 },

    #[error("scale {scale} is not resolved on the grid (atom width {width:e} < {min_width:e})")]
    Unresolved {
        scale: f64,
        width: f64,
        min_width: f64,
    },

    #[error("kernel bank is not matched (requires a = alpha and b = beta)")]
    UnmatchedBank,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors that signal a dynamically unstable configuration.
    pub fn is_instability(&self) -> bool {
        matches!(
            self,
            Error::Unstable { .. } | Error::Overflow { .. } | Error::SingularDenominator { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
