//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by image construction, the warp algebra, the solvers and
/// the measurement pipeline.
///
/// Per-point solver breakdowns (divergence, lost texture, a subset leaving
/// the image) are usually *recorded* in a [`crate::solver::SolveOutcome`]
/// rather than raised; the variants here cover misuse and unrecoverable
/// conditions.
#[derive(Debug, Error)]
pub enum Error {
    #[error("image dimensions {width}x{height} too small, need at least 5x5")]
    DimensionTooSmall { width: usize, height: usize },

    #[error("point ({x}, {y}) outside the valid interior domain")]
    OutOfDomain { x: f64, y: f64 },

    #[error("sample length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("subset grayscale spread {sdev:.3e} below flatness threshold {threshold:.3e}")]
    FlatSubset { sdev: f64, threshold: f64 },

    #[error("normal equations singular or ill-conditioned (condition estimate {cond:.3e})")]
    Singular { cond: f64 },

    #[error("warp matrix singular (det {det:.3e})")]
    SingularWarp { det: f64 },

    #[error("shape function has no homogeneous warp embedding: {reason}")]
    UnsupportedSpec { reason: String },

    #[error("invalid shape function: {reason}")]
    InvalidSpec { reason: String },

    #[error("invalid analysis plan: {reason}")]
    InvalidPlan { reason: String },

    #[error(
        "temporal window of {window} frames around frame {central} leaves a sequence of {len}"
    )]
    WindowOutOfRange {
        central: usize,
        window: usize,
        len: usize,
    },

    #[error("field contains no converged points")]
    NoConvergedPoints,

    #[error("no frames left after filtering")]
    EmptyAfterFilter,

    #[error("field parameters lack the requested gradient components")]
    SpecLacksGradients,

    #[error("linear fit needs at least 3 points with non-constant abscissa")]
    DegenerateAbscissa,

    #[error("motion of {max_displacement:.2} px does not fit a {width}x{height} image")]
    MotionTooLarge {
        max_displacement: f64,
        width: usize,
        height: usize,
    },

    #[error("bad image file {path}: {reason}")]
    BadImageFile { path: String, reason: String },

    #[error("bad csv file {path}: {reason}")]
    BadCsvFile { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
