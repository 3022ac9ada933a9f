//! Euclidean and Riemannian gradients of the chordal objective and of both
//! subproblem objectives, with sign-split outputs ready for multiplicative
//! updates.

use ndarray::{Array, Array1, Array2, Dimension, Ix1, Ix2};

use crate::error::{Error, Result};
use crate::manifold::{EllipsoidManifold, SpectrahedraPair, SpectrahedronShell, MEMBERSHIP_TOL};
use crate::matrix::{self, DEFAULT_FLOOR};

/// A gradient written as `plus - minus` with both parts nonnegative
/// whenever the underlying data is nonnegative.
#[derive(Debug, Clone)]
pub struct GradSplit<D: Dimension> {
    pub plus: Array<f64, D>,
    pub minus: Array<f64, D>,
}

pub type VectorGradSplit = GradSplit<Ix1>;
pub type MatrixGradSplit = GradSplit<Ix2>;

impl<D: Dimension> GradSplit<D> {
    /// Recombines the split into the gradient it represents.
    pub fn gradient(&self) -> Array<f64, D> {
        &self.plus - &self.minus
    }
}

/// Gradient of `x -> <A x + b, c> / ||D x + e||_2`.
///
/// Returns `(||Dx+e||^2 A^T c - <Ax+b, c> D^T (Dx+e)) / ||Dx+e||^3`.
pub fn quotient_grad(
    num_map: &Array2<f64>,
    num_shift: &Array1<f64>,
    weights: &Array1<f64>,
    den_map: &Array2<f64>,
    den_shift: &Array1<f64>,
    x: &Array1<f64>,
) -> Result<Array1<f64>> {
    let den_vec = den_map.dot(x) + den_shift;
    let den_norm_sq = den_vec.dot(&den_vec);
    let den_norm = den_norm_sq.sqrt();
    if den_norm < DEFAULT_FLOOR {
        return Err(Error::Singularity { term: 0 });
    }
    let num_val = (num_map.dot(x) + num_shift).dot(weights);
    let atc = num_map.t().dot(weights);
    let dtd = den_map.t().dot(&den_vec);
    Ok((atc * den_norm_sq - dtd * num_val) / den_norm.powi(3))
}

/// The chordal objective `(1/n) sum_j (1 - <m_j, W h_j> / ||W h_j||)`.
///
/// `m` must have unit columns (see `nmf::preprocess`); the cosine of each
/// column pair is clamped into [-1, 1] against rounding.
pub fn chordal_objective(m: &Array2<f64>, w: &Array2<f64>, h: &Array2<f64>) -> Result<f64> {
    if w.nrows() != m.nrows() || w.ncols() != h.nrows() || h.ncols() != m.ncols() {
        return Err(Error::ShapeMismatch {
            expected: vec![m.nrows(), m.ncols()],
            found: vec![w.nrows(), h.ncols()],
        });
    }
    let wh = w.dot(h);
    let n = m.ncols();
    let mut total = 0.0;
    for j in 0..n {
        let col = wh.column(j);
        let norm = col.dot(&col).sqrt();
        if norm < DEFAULT_FLOOR {
            return Err(Error::DegenerateColumn(j));
        }
        let cos = (m.column(j).dot(&col) / norm).clamp(-1.0, 1.0);
        total += 1.0 - cos;
    }
    Ok(total / n as f64)
}

/// Mean cosine distance between the columns of `m` and of `w h`, defined
/// for unnormalized data: zero data columns are skipped, vanished
/// reconstructions count as the maximal distance 1.
///
/// Used for cross-method traces where the data may not be preprocessed.
pub fn cosine_distance_mean(m: &Array2<f64>, w: &Array2<f64>, h: &Array2<f64>) -> f64 {
    let wh = w.dot(h);
    let mut total = 0.0;
    let mut counted = 0usize;
    for j in 0..m.ncols() {
        let mj = m.column(j);
        let mn = mj.dot(&mj).sqrt();
        if mn == 0.0 {
            continue;
        }
        counted += 1;
        let col = wh.column(j);
        let cn = col.dot(&col).sqrt();
        if cn < DEFAULT_FLOOR {
            total += 1.0;
        } else {
            total += 1.0 - (mj.dot(&col) / (mn * cn)).clamp(-1.0, 1.0);
        }
    }
    if counted == 0 {
        0.0
    } else {
        total / counted as f64
    }
}

/// Sign split of the Riemannian gradient of the column subproblem
/// `phi(h) = 1 - <m_j, W h>` on the ellipsoid of `W^T W`:
/// `plus = (A h) <A h, W^T m> / ||A h||^2`, `minus = W^T m`.
pub fn h_grad_split(
    w: &Array2<f64>,
    data_col: &Array1<f64>,
    h: &Array1<f64>,
) -> Result<VectorGradSplit> {
    let manifold = EllipsoidManifold::from_factor(w)?;
    let back = w.t().dot(data_col);
    let res = manifold.residual(h);
    if res.abs() > MEMBERSHIP_TOL {
        return Err(Error::OffManifold(res));
    }
    h_grad_split_on(manifold.gram(), &back, h)
}

/// Same split from a precomputed Gram matrix `A = W^T W` and
/// back-projected data column `W^T m_j`.
pub(crate) fn h_grad_split_on(
    gram: &Array2<f64>,
    back: &Array1<f64>,
    h: &Array1<f64>,
) -> Result<VectorGradSplit> {
    let ah = gram.dot(h);
    let n2 = ah.dot(&ah);
    if n2 < DEFAULT_FLOOR {
        return Err(Error::DegenerateDirection);
    }
    let coeff = ah.dot(back) / n2;
    Ok(GradSplit {
        plus: ah * coeff,
        minus: back.clone(),
    })
}

/// Ratio-sum objective of the basis subproblem,
/// `F(W) = sum_j <B_j, W>_F / sqrt(<W, W A_j>_F)`.
pub fn w_ratio_sum(w: &Array2<f64>, shells: &[SpectrahedronShell]) -> Result<f64> {
    let mut total = 0.0;
    for (j, shell) in shells.iter().enumerate() {
        let d = shell.metric_norm(w).powi(2);
        if d < DEFAULT_FLOOR {
            return Err(Error::Singularity { term: j });
        }
        total += matrix::frob_inner(shell.data(), w) / d.sqrt();
    }
    Ok(total)
}

/// Like `w_ratio_sum` but skipping degenerate terms; used when tracing
/// methods that drop vanished shells instead of failing.
pub(crate) fn w_ratio_sum_lenient(w: &Array2<f64>, shells: &[SpectrahedronShell]) -> f64 {
    shells
        .iter()
        .filter_map(|shell| {
            let d = shell.metric_norm(w).powi(2);
            (d >= DEFAULT_FLOOR).then(|| matrix::frob_inner(shell.data(), w) / d.sqrt())
        })
        .sum()
}

/// Euclidean gradient of the ratio-sum objective,
/// `sum_j B_j / d_j^{1/2} - <B_j, W>_F (W A_j) / d_j^{3/2}` with
/// `d_j = <W, W A_j>_F`.
pub fn w_euclidean_grad(w: &Array2<f64>, shells: &[SpectrahedronShell]) -> Result<Array2<f64>> {
    let mut grad = Array2::<f64>::zeros(w.raw_dim());
    for (j, shell) in shells.iter().enumerate() {
        let d = shell.metric_norm(w).powi(2);
        if d < DEFAULT_FLOOR {
            return Err(Error::Singularity { term: j });
        }
        let wa = shell.z_constraint(w);
        let bw = matrix::frob_inner(shell.data(), w);
        let d_sqrt = d.sqrt();
        grad = grad + &(shell.data() / d_sqrt) - &(wa * (bw / (d * d_sqrt)));
    }
    Ok(grad)
}

/// Sign split of the Riemannian gradient on a single shell:
/// `plus = (Z A_j) <Z A_j, B_j>_F / ||Z A_j||_F^2`, `minus = B_j`.
pub fn w_grad_split_n1(shell: &SpectrahedronShell, z: &Array2<f64>) -> Result<MatrixGradSplit> {
    let res = shell.residual(z);
    if res.abs() > MEMBERSHIP_TOL {
        return Err(Error::OffManifold(res));
    }
    let za = shell.z_constraint(z);
    let n2 = matrix::frob_inner(&za, &za);
    if n2 < DEFAULT_FLOOR {
        return Err(Error::DegenerateDirection);
    }
    let coeff = matrix::frob_inner(&za, shell.data()) / n2;
    Ok(GradSplit {
        plus: za * coeff,
        minus: shell.data().clone(),
    })
}

/// Riemannian gradient on the two-shell intersection via the explicit
/// pseudo-inverse coefficients.
pub fn spectrahedra2_riemannian_grad(
    pair: &SpectrahedraPair,
    z: &Array2<f64>,
    euclid: &Array2<f64>,
) -> Result<Array2<f64>> {
    pair.riemannian_grad(z, euclid)
}
