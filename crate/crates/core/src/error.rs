//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {found:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    /// A column that must be nonzero has zero norm.
    #[error("column {0} has zero norm")]
    ZeroColumn(usize),

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    /// Cholesky factorization failed; the Gram matrix has a nonpositive pivot.
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    /// The weighted inner product came out significantly negative.
    #[error("weight matrix is not positive semidefinite (inner product {0:.3e})")]
    NotPsd(f64),

    /// A reference point violated its on-manifold precondition.
    #[error("point is off the manifold (membership residual {0:.3e})")]
    OffManifold(f64),

    /// Retraction direction with vanishing manifold norm.
    #[error("degenerate direction: manifold norm below floor")]
    DegenerateDirection,

    /// The 2x2 constraint Gram matrix of the two-shell manifold is rank
    /// deficient (parallel constraints); fall back to a single shell.
    #[error("constraint Gram matrix is numerically singular")]
    SingularConstraint,

    /// A per-term denominator fell below the floor.
    #[error("denominator of term {term} is below the floor")]
    Singularity { term: usize },

    /// A reconstructed column W*h_j vanished.
    #[error("reconstructed column {0} is zero")]
    DegenerateColumn(usize),

    /// A multiplicative update annihilated all mass; callers may perturb
    /// the iterate and retry.
    #[error("update stalled: all mass annihilated")]
    Stall,

    #[error("all columns of the input are zero")]
    EmptyProblem,

    #[error("precondition violated: {0}")]
    Precondition(String),
}
