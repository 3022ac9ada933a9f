//! Nonnegative matrix factorization under a ray-to-ray chordal (cosine)
//! distance, solved by block coordinate descent with a Riemannian
//! multiplicative update on the ellipsoid of the coefficient columns and
//! the spectrahedron shells of the basis subproblem. Euclidean projected
//! gradient, fractional programming, and consensus-averaged updates are
//! provided as basis-block alternatives, plus a HALS Frobenius-NMF
//! baseline.

pub mod error;
pub mod gradient;
pub mod manifold;
pub mod matrix;
pub mod nmf;
pub mod solver;

pub use error::{Error, Result};
pub use gradient::{chordal_objective, GradSplit, MatrixGradSplit, VectorGradSplit};
pub use manifold::{EllipsoidManifold, SpectrahedraPair, SpectrahedronShell};
pub use matrix::SignSplit;
pub use nmf::{BcdConfig, FactorPair, IterationTrace, Preprocessed, TraceRow, WSolver};
pub use solver::{EpgStepRule, SolveReport, SolverOptions};
