//! Embedded-submanifold primitives: membership residuals, tangent-space
//! projectors, and metric retractions.
//!
//! Three manifolds appear in the factorization. The coefficient column of
//! each data column lives on an ellipsoid `{x : <A x, x> = 1}` with
//! `A = W^T W`. The basis matrix of a single-column subproblem lives on the
//! shell `{W : <W, W A_j>_F = 1}` with rank-1 `A_j = h_j h_j^T`. The
//! intersection of two such shells is kept for desk-scale validation only.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::matrix::{self, DEFAULT_FLOOR};

/// Membership tolerance demanded of reference points before a tangent
/// projection or retraction is evaluated.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

/// Looser membership tolerance for the two-shell intersection.
pub const PAIR_MEMBERSHIP_TOL: f64 = 1e-6;

/// Relative singular-value cutoff for the 2x2 constraint Gram matrix.
const GRAM_CUTOFF: f64 = 1e-12;

/// The ellipsoid `{x in R^r : <A x, x> = 1}` for a symmetric positive
/// definite `A`.
#[derive(Debug, Clone)]
pub struct EllipsoidManifold {
    gram: Array2<f64>,
}

impl EllipsoidManifold {
    /// Builds the manifold from its defining matrix, verifying symmetry
    /// and (via Cholesky) positive definiteness.
    pub fn new(gram: Array2<f64>) -> Result<Self> {
        if gram.nrows() != gram.ncols() {
            return Err(Error::ShapeMismatch {
                expected: vec![gram.nrows(), gram.nrows()],
                found: vec![gram.nrows(), gram.ncols()],
            });
        }
        let scale = 1.0 + gram.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let mut asym = 0.0f64;
        for i in 0..gram.nrows() {
            for j in (i + 1)..gram.ncols() {
                asym = asym.max((gram[[i, j]] - gram[[j, i]]).abs());
            }
        }
        if asym > 1e-12 * scale {
            return Err(Error::NotSymmetric(asym));
        }
        if matrix::cholesky(&gram).is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self { gram })
    }

    /// Builds the ellipsoid of the coefficient columns, `A = W^T W`.
    /// Fails when `w` is rank deficient.
    pub fn from_factor(w: &Array2<f64>) -> Result<Self> {
        Self::new(w.t().dot(w))
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn gram(&self) -> &Array2<f64> {
        &self.gram
    }

    /// Manifold norm `sqrt(<A v, v>)`; rounding-level negatives clamp to 0.
    pub fn metric_norm(&self, v: &Array1<f64>) -> f64 {
        self.gram.dot(v).dot(v).max(0.0).sqrt()
    }

    /// Membership residual `<A x, x> - 1`; a point is on the manifold iff
    /// the residual is (numerically) zero.
    pub fn residual(&self, x: &Array1<f64>) -> f64 {
        self.gram.dot(x).dot(x) - 1.0
    }

    fn check_membership(&self, x: &Array1<f64>) -> Result<()> {
        let res = self.residual(x);
        if res.abs() > MEMBERSHIP_TOL {
            return Err(Error::OffManifold(res));
        }
        Ok(())
    }

    /// Orthogonal projection of `xi` onto the tangent space at `zeta`:
    /// `xi - (<A zeta, xi> / ||A zeta||^2) A zeta`.
    pub fn project_tangent(&self, zeta: &Array1<f64>, xi: &Array1<f64>) -> Result<Array1<f64>> {
        self.check_membership(zeta)?;
        let az = self.gram.dot(zeta);
        let n2 = az.dot(&az);
        if n2 < DEFAULT_FLOOR {
            return Err(Error::DegenerateDirection);
        }
        let alpha = az.dot(xi) / n2;
        Ok(xi - &(az * alpha))
    }

    /// Metric retraction `(zeta + xi) / ||zeta + xi||_A`. The general
    /// (non-tangent) denominator is used; for tangent `xi` it agrees with
    /// `sqrt(1 + ||xi||_A^2)`.
    pub fn retract(&self, zeta: &Array1<f64>, xi: &Array1<f64>) -> Result<Array1<f64>> {
        self.check_membership(zeta)?;
        if xi.iter().all(|&v| v == 0.0) {
            return Ok(zeta.clone());
        }
        let moved = zeta + xi;
        let norm = self.metric_norm(&moved);
        if norm < DEFAULT_FLOOR {
            return Err(Error::DegenerateDirection);
        }
        Ok(moved / norm)
    }
}

/// The shell `{W in R^{m x r} : <W, W A_j>_F = 1}` of a single-column
/// subproblem, with rank-1 constraint `A_j = h_j h_j^T` and data term
/// `B_j = m_j h_j^T`.
#[derive(Debug, Clone)]
pub struct SpectrahedronShell {
    constraint: Array2<f64>,
    data: Array2<f64>,
    coeff: Array1<f64>,
}

impl SpectrahedronShell {
    /// Builds the shell from a data column and a coefficient column, both
    /// nonnegative with a nonzero coefficient.
    pub fn from_columns(data_col: &Array1<f64>, coeff_col: &Array1<f64>) -> Result<Self> {
        if data_col.iter().chain(coeff_col.iter()).any(|&v| v < 0.0) {
            return Err(Error::Precondition(
                "shell columns must be nonnegative".into(),
            ));
        }
        if coeff_col.iter().all(|&v| v == 0.0) {
            return Err(Error::Precondition("coefficient column is zero".into()));
        }
        Ok(Self {
            constraint: matrix::outer(coeff_col, coeff_col),
            data: matrix::outer(data_col, coeff_col),
            coeff: coeff_col.clone(),
        })
    }

    /// The rank-1 constraint matrix `A_j`.
    pub fn constraint(&self) -> &Array2<f64> {
        &self.constraint
    }

    /// The data matrix `B_j`.
    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    /// `Z A_j`, computed through the rank-1 structure.
    pub fn z_constraint(&self, z: &Array2<f64>) -> Array2<f64> {
        matrix::outer(&z.dot(&self.coeff), &self.coeff)
    }

    /// Manifold norm `sqrt(<V, V A_j>_F) = ||V h_j||_2`.
    pub fn metric_norm(&self, v: &Array2<f64>) -> f64 {
        let vh = v.dot(&self.coeff);
        vh.dot(&vh).max(0.0).sqrt()
    }

    /// Membership residual `<Z, Z A_j>_F - 1`.
    pub fn residual(&self, z: &Array2<f64>) -> f64 {
        let zh = z.dot(&self.coeff);
        zh.dot(&zh) - 1.0
    }

    fn check_membership(&self, z: &Array2<f64>) -> Result<()> {
        let res = self.residual(z);
        if res.abs() > MEMBERSHIP_TOL {
            return Err(Error::OffManifold(res));
        }
        Ok(())
    }

    /// Orthogonal projection of `w` onto the tangent space at `z`:
    /// `w - (<Z A_j, w>_F / ||Z A_j||_F^2) Z A_j`.
    pub fn project_tangent(&self, z: &Array2<f64>, w: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_membership(z)?;
        let za = self.z_constraint(z);
        let n2 = matrix::frob_inner(&za, &za);
        if n2 < DEFAULT_FLOOR {
            return Err(Error::DegenerateDirection);
        }
        let alpha = matrix::frob_inner(&za, w) / n2;
        Ok(w - &(za * alpha))
    }

    /// Metric retraction `(z + w) / ||z + w||_{A_j^{1/2}}`.
    pub fn retract(&self, z: &Array2<f64>, w: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_membership(z)?;
        if w.iter().all(|&v| v == 0.0) {
            return Ok(z.clone());
        }
        let moved = z + w;
        let norm = self.metric_norm(&moved);
        if norm < DEFAULT_FLOOR {
            return Err(Error::DegenerateDirection);
        }
        Ok(moved / norm)
    }
}

/// The intersection of two shells. Kept for desk-scale validation: the
/// BCD pipeline never uses it because the n-shell projection has no
/// closed form and recomputing the constraint Gram every step is costly.
#[derive(Debug, Clone)]
pub struct SpectrahedraPair {
    first: Array2<f64>,
    second: Array2<f64>,
}

impl SpectrahedraPair {
    /// Builds both rank-1 constraints from two coefficient columns.
    pub fn from_coefficients(h1: &Array1<f64>, h2: &Array1<f64>) -> Self {
        Self {
            first: matrix::outer(h1, h1),
            second: matrix::outer(h2, h2),
        }
    }

    pub fn constraints(&self) -> (&Array2<f64>, &Array2<f64>) {
        (&self.first, &self.second)
    }

    /// Membership residuals against both shells.
    pub fn residuals(&self, z: &Array2<f64>) -> (f64, f64) {
        let r1 = matrix::frob_inner(z, &z.dot(&self.first)) - 1.0;
        let r2 = matrix::frob_inner(z, &z.dot(&self.second)) - 1.0;
        (r1, r2)
    }

    /// Solves the 2x2 normal equations `S_Z^T S_Z alpha = 0.5 S_Z^T vec(v)`
    /// where the columns of `S_Z` are `vec(Z A_1)` and `vec(Z A_2)`.
    ///
    /// Returns the multipliers together with `Z A_1` and `Z A_2`.
    fn multipliers(
        &self,
        z: &Array2<f64>,
        v: &Array2<f64>,
    ) -> Result<(f64, f64, Array2<f64>, Array2<f64>)> {
        let za1 = z.dot(&self.first);
        let za2 = z.dot(&self.second);
        let g11 = matrix::frob_inner(&za1, &za1);
        let g12 = matrix::frob_inner(&za1, &za2);
        let g22 = matrix::frob_inner(&za2, &za2);
        // Eigenvalues of the symmetric 2x2 Gram matrix.
        let mean = 0.5 * (g11 + g22);
        let disc = (0.25 * (g11 - g22).powi(2) + g12 * g12).sqrt();
        let lmax = mean + disc;
        let lmin = mean - disc;
        if lmax <= 0.0 || lmin <= GRAM_CUTOFF * lmax {
            return Err(Error::SingularConstraint);
        }
        let rhs1 = matrix::frob_inner(&za1, v);
        let rhs2 = matrix::frob_inner(&za2, v);
        let det = g11 * g22 - g12 * g12;
        let a1 = 0.5 * (g22 * rhs1 - g12 * rhs2) / det;
        let a2 = 0.5 * (g11 * rhs2 - g12 * rhs1) / det;
        Ok((a1, a2, za1, za2))
    }

    fn check_membership(&self, z: &Array2<f64>) -> Result<()> {
        let (r1, r2) = self.residuals(z);
        let worst = if r1.abs() > r2.abs() { r1 } else { r2 };
        if worst.abs() > PAIR_MEMBERSHIP_TOL {
            return Err(Error::OffManifold(worst));
        }
        Ok(())
    }

    /// Orthogonal projection of `w` onto the intersection tangent space:
    /// `w - 2 Z (a1 A_1 + a2 A_2)` with the multipliers from the normal
    /// equations.
    pub fn project_tangent(&self, z: &Array2<f64>, w: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_membership(z)?;
        let (a1, a2, za1, za2) = self.multipliers(z, w)?;
        Ok(w - &(za1 * (2.0 * a1)) - &(za2 * (2.0 * a2)))
    }

    /// Riemannian gradient on the intersection: subtracts the normal
    /// component `Z ((S^+ vec g)_1 A_1 + (S^+ vec g)_2 A_2)` from the
    /// ambient gradient.
    pub fn riemannian_grad(&self, z: &Array2<f64>, euclid: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_membership(z)?;
        let (a1, a2, za1, za2) = self.multipliers(z, euclid)?;
        // The pseudo-inverse coefficients are twice the least-squares
        // multipliers.
        let (b1, b2) = (2.0 * a1, 2.0 * a2);
        Ok(euclid - &(za1 * b1) - &(za2 * b2))
    }
}
