use crate::alg_convex::Decomposition;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied parameter violates a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The input is structurally valid but numerically degenerate for the
    /// requested operation (e.g. a zero matrix where a subspace is needed).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// An operation that compares against ground truth was called on an
    /// instance that carries none.
    #[error("ground truth missing: {0}")]
    MissingGroundTruth(&'static str),

    /// The sketch-local outlier test flagged every sampled column, so there
    /// is nothing to build a basis from. Carries the smallest relative
    /// residual seen, which tells the caller how far the best column was
    /// from passing.
    #[error(
        "no inliers detected among {effective_m1} sampled columns \
         (smallest relative residual {min_relative:.3e})"
    )]
    NoInliersDetected {
        effective_m1: usize,
        min_relative: f64,
    },

    /// An iterative solver ran out of its iteration or time budget. For the
    /// convex decomposition the partial iterate is attached so callers can
    /// inspect (or keep) it.
    #[error("{context}: no convergence after {iterations} iterations (residual {residual:.3e})")]
    Convergence {
        context: &'static str,
        iterations: usize,
        residual: f64,
        partial: Option<Box<Decomposition>>,
    },

    /// Two internally computed quantities disagree; indicates a tolerance
    /// mismatch rather than bad user input.
    #[error("internal consistency: {0}")]
    Internal(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    /// A matrix or index file did not match the expected on-disk format.
    #[error("file format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
