//! Evaluation metrics: relative Frobenius error, permutation-aligned
//! basis error, and the SID-SAM spectral similarity score.

use itertools::Itertools;
use ndarray::{Array1, Array2};

use chordal_core::matrix::frob_norm;

use crate::error::{HarnessError, Result};

/// Relative Frobenius error `||X - X_true||_F / ||X_true||_F`.
pub fn rel_error(x: &Array2<f64>, x_true: &Array2<f64>) -> Result<f64> {
    if x.shape() != x_true.shape() {
        return Err(HarnessError::Invalid(format!(
            "shape mismatch: {:?} vs {:?}",
            x.shape(),
            x_true.shape()
        )));
    }
    let denom = frob_norm(x_true);
    if denom == 0.0 {
        return Err(HarnessError::UndefinedReference);
    }
    Ok(frob_norm(&(x - x_true)) / denom)
}

fn normalized_columns(m: &Array2<f64>) -> Array2<f64> {
    let mut out = m.clone();
    for j in 0..m.ncols() {
        let norm = out.column(j).dot(&out.column(j)).sqrt();
        if norm > 0.0 {
            out.column_mut(j).mapv_inplace(|v| v / norm);
        }
    }
    out
}

/// Scale- and permutation-invariant basis error: both matrices are
/// column-normalized, then the minimal relative error over all column
/// permutations is returned. Exhaustive search, so the rank is capped.
pub fn w_aligned_error(w: &Array2<f64>, w_true: &Array2<f64>) -> Result<f64> {
    if w.shape() != w_true.shape() {
        return Err(HarnessError::Invalid(format!(
            "shape mismatch: {:?} vs {:?}",
            w.shape(),
            w_true.shape()
        )));
    }
    let r = w.ncols();
    if r > 8 {
        return Err(HarnessError::Invalid(format!(
            "rank {r} too large for exhaustive permutation alignment (max 8)"
        )));
    }
    let a = normalized_columns(w);
    let b = normalized_columns(w_true);
    let denom = frob_norm(&b);
    if denom == 0.0 {
        return Err(HarnessError::UndefinedReference);
    }
    let mut best = f64::INFINITY;
    for perm in (0..r).permutations(r) {
        let mut diff_sq = 0.0;
        for (target_col, &source_col) in perm.iter().enumerate() {
            let d = &a.column(source_col) - &b.column(target_col);
            diff_sq += d.dot(&d);
        }
        best = best.min(diff_sq.sqrt() / denom);
    }
    Ok(best)
}

/// SID-SAM similarity between two nonnegative spectra: the spectral
/// information divergence of the L2-normalized vectors (entries floored
/// before the logarithms) times the tangent of the spectral angle.
///
/// Returns the score and whether any entry had to be floored.
pub fn sid_sam(t: &Array1<f64>, r: &Array1<f64>, floor: f64) -> Result<(f64, bool)> {
    if t.len() != r.len() {
        return Err(HarnessError::Invalid(format!(
            "length mismatch: {} vs {}",
            t.len(),
            r.len()
        )));
    }
    if t.iter().chain(r.iter()).any(|&v| v < 0.0) {
        return Err(HarnessError::Invalid("spectra must be nonnegative".into()));
    }
    let tn = t.dot(t).sqrt();
    let rn = r.dot(r).sqrt();
    if tn == 0.0 || rn == 0.0 {
        return Err(HarnessError::Invalid("spectra must be nonzero".into()));
    }
    let mut floored = false;
    let mut clamp = |v: f64| {
        if v < floor {
            floored = true;
            floor
        } else {
            v
        }
    };
    let mut sid = 0.0;
    for (&ti, &ri) in t.iter().zip(r.iter()) {
        let p = clamp(ti / tn);
        let q = clamp(ri / rn);
        sid += p * (p / q).ln() + q * (q / p).ln();
    }
    let cos = (t.dot(r) / (tn * rn)).clamp(-1.0, 1.0);
    let alpha = cos.acos();
    Ok((sid * alpha.tan(), floored))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rel_error_basics() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        assert_eq!(rel_error(&x, &x).unwrap(), 0.0);
        let zero = Array2::zeros((2, 2));
        assert_eq!(rel_error(&zero, &x).unwrap(), 1.0);
        assert!(matches!(
            rel_error(&x, &zero),
            Err(HarnessError::UndefinedReference)
        ));
    }

    #[test]
    fn rel_error_matches_loop_oracle() {
        let x = Array2::from_shape_fn((4, 3), |(i, j)| ((i * 3 + j) as f64 * 0.7).sin());
        let y = Array2::from_shape_fn((4, 3), |(i, j)| ((i * 3 + j) as f64 * 1.1).cos());
        let got = rel_error(&x, &y).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for ((i, j), &v) in x.indexed_iter() {
            num += (v - y[[i, j]]).powi(2);
            den += y[[i, j]].powi(2);
        }
        let oracle = (num / den).sqrt();
        assert!((got - oracle).abs() <= 1e-14);
    }

    #[test]
    fn aligned_error_invariances() {
        let w_true = array![[0.8, 0.1, 0.1], [0.1, 0.8, 0.1], [0.1, 0.1, 0.8]];
        // permuted columns
        let permuted = array![[0.1, 0.1, 0.8], [0.8, 0.1, 0.1], [0.1, 0.8, 0.1]];
        assert!(w_aligned_error(&permuted, &w_true).unwrap() <= 1e-14);
        // rescaled columns
        let mut rescaled = w_true.clone();
        for (j, s) in [2.0, 0.5, 7.0].iter().enumerate() {
            rescaled.column_mut(j).mapv_inplace(|v| v * s);
        }
        assert!(w_aligned_error(&rescaled, &w_true).unwrap() <= 1e-14);
    }

    #[test]
    fn aligned_error_matches_exhaustive_oracle() {
        let w_true = array![[0.8, 0.1, 0.1], [0.1, 0.8, 0.1], [0.1, 0.1, 0.8]];
        let perturbed = Array2::from_shape_fn((3, 3), |(i, j)| {
            w_true[[i, j]] + 0.05 * ((i * 3 + j) as f64 * 0.9).sin()
        });
        let got = w_aligned_error(&perturbed, &w_true).unwrap();
        // brute force over all 3! permutations with fresh code
        let a = normalized_columns(&perturbed);
        let b = normalized_columns(&w_true);
        let perms = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        let mut best = f64::INFINITY;
        for p in perms {
            let mut sq = 0.0;
            for (tgt, &src) in p.iter().enumerate() {
                for i in 0..3 {
                    sq += (a[[i, src]] - b[[i, tgt]]).powi(2);
                }
            }
            best = best.min(sq.sqrt() / frob_norm(&b));
        }
        assert!((got - best).abs() <= 1e-14);
        // minimality: no worse than the identity assignment
        let identity = rel_error(&a, &b).unwrap();
        assert!(got <= identity + 1e-14);
    }

    #[test]
    fn aligned_error_rejects_large_rank() {
        let w = Array2::<f64>::ones((10, 9));
        assert!(matches!(
            w_aligned_error(&w, &w),
            Err(HarnessError::Invalid(_))
        ));
    }

    #[test]
    fn sid_sam_identical_spectra_score_zero() {
        let t = array![0.3, 0.5, 0.2];
        let (v, floored) = sid_sam(&t, &t, 1e-12).unwrap();
        assert_eq!(v, 0.0);
        assert!(!floored);
    }

    #[test]
    fn sid_sam_direct_formula_example() {
        let t = array![2.0, 1.0];
        let r = array![1.0, 2.0];
        let (v, floored) = sid_sam(&t, &r, 1e-12).unwrap();
        // direct evaluation: SID = (2/sqrt(5)) ln 2, tan(alpha) = 0.75
        let sid = 2.0 / 5f64.sqrt() * 2f64.ln();
        assert!((sid - 0.62000).abs() <= 5e-5);
        let expect = sid * 0.75;
        assert!((v - expect).abs() <= 1e-12, "got {v}, expected {expect}");
        assert!((v - 0.46500).abs() <= 5e-5);
        assert!(!floored);
    }

    #[test]
    fn sid_sam_floors_zero_channels() {
        let t = array![1.0, 1.0];
        let r = array![1.0, 0.0];
        let (v, floored) = sid_sam(&t, &r, 1e-12).unwrap();
        assert!(v.is_finite());
        assert!(floored);
        let zero = array![0.0, 0.0];
        assert!(sid_sam(&t, &zero, 1e-12).is_err());
    }

    #[test]
    fn sid_sam_is_symmetric() {
        let t = array![0.9, 0.1, 0.4, 0.2];
        let r = array![0.2, 0.7, 0.3, 0.5];
        let (a, _) = sid_sam(&t, &r, 1e-12).unwrap();
        let (b, _) = sid_sam(&r, &t, 1e-12).unwrap();
        assert!((a - b).abs() <= 1e-12);
    }
}
