//! Dense matrix kernels and the small algebraic helpers every other
//! module builds on.
//!
//! All data is carried as `ndarray` arrays of `f64` (row-major). The
//! functions here are pure; callers may invoke them concurrently.

use ndarray::{Array, Array1, Array2, Dimension};

use crate::error::{Error, Result};

/// Default clamp applied to denominators of element-wise divisions.
pub const DEFAULT_FLOOR: f64 = 1e-16;

/// Element-wise sign decomposition `b = plus - minus` with both parts
/// nonnegative and disjoint supports.
#[derive(Debug, Clone, PartialEq)]
pub struct SignSplit {
    pub plus: Array2<f64>,
    pub minus: Array2<f64>,
}

/// Splits `b` into its nonnegative and nonpositive parts:
/// `plus = max(0, b)`, `minus = max(0, -b)` element-wise.
pub fn sign_split(b: &Array2<f64>) -> SignSplit {
    SignSplit {
        plus: b.mapv(|v| v.max(0.0)),
        minus: b.mapv(|v| (-v).max(0.0)),
    }
}

pub(crate) fn check_same_shape<D: Dimension>(a: &Array<f64, D>, b: &Array<f64, D>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            expected: a.shape().to_vec(),
            found: b.shape().to_vec(),
        });
    }
    Ok(())
}

/// Element-wise `x * num / max(den, floor)`, the safe kernel behind every
/// multiplicative update.
pub fn mul_div_floor<D: Dimension>(
    x: &Array<f64, D>,
    num: &Array<f64, D>,
    den: &Array<f64, D>,
    floor: f64,
) -> Result<Array<f64, D>> {
    check_same_shape(x, num)?;
    check_same_shape(x, den)?;
    let mut out = x.clone();
    ndarray::Zip::from(&mut out)
        .and(num)
        .and(den)
        .for_each(|o, &n, &d| *o = *o * n / d.max(floor));
    Ok(out)
}

/// Frobenius inner product of two equally shaped arrays.
pub fn frob_inner<D: Dimension>(a: &Array<f64, D>, b: &Array<f64, D>) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    ndarray::Zip::from(a)
        .and(b)
        .fold(0.0, |acc, &x, &y| acc + x * y)
}

/// Frobenius norm.
pub fn frob_norm<D: Dimension>(a: &Array<f64, D>) -> f64 {
    frob_inner(a, a).sqrt()
}

/// Outer product `u v^T`.
pub fn outer(u: &Array1<f64>, v: &Array1<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((u.len(), v.len()));
    for (i, &ui) in u.iter().enumerate() {
        for (j, &vj) in v.iter().enumerate() {
            out[[i, j]] = ui * vj;
        }
    }
    out
}

/// Weighted norm `sqrt(<W, W A>_F)` for a symmetric PSD weight `A`.
///
/// Rejects weights whose quadratic form comes out significantly negative;
/// tiny negatives from rounding are clamped to zero.
pub fn weighted_norm(w: &Array2<f64>, a: &Array2<f64>) -> Result<f64> {
    if a.nrows() != a.ncols() || w.ncols() != a.nrows() {
        return Err(Error::ShapeMismatch {
            expected: vec![w.ncols(), w.ncols()],
            found: vec![a.nrows(), a.ncols()],
        });
    }
    let wa = w.dot(a);
    let raw = frob_inner(w, &wa);
    let scale = 1.0 + frob_inner(w, w) * frob_norm(a);
    if raw < -1e-12 * scale {
        return Err(Error::NotPsd(raw));
    }
    Ok(raw.max(0.0).sqrt())
}

/// Scales each column of `m` to unit Euclidean norm, returning the scaled
/// matrix and the original column norms.
///
/// Columns with zero norm are rejected; callers that want them dropped
/// must do so beforehand (`nmf::preprocess` tracks the indices).
pub fn normalize_columns(m: &Array2<f64>) -> Result<(Array2<f64>, Vec<f64>)> {
    let mut out = m.clone();
    let mut scales = Vec::with_capacity(m.ncols());
    for j in 0..m.ncols() {
        let norm = out.column(j).dot(&out.column(j)).sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroColumn(j));
        }
        out.column_mut(j).mapv_inplace(|v| v / norm);
        scales.push(norm);
    }
    Ok((out, scales))
}

/// Cholesky factor `L` with `a = L L^T`, or `None` when `a` is not
/// positive definite. Intended for the small Gram matrices (r x r) that
/// define the ellipsoid manifold.
pub fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return None;
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Some(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn sign_split_definition() {
        let b = array![[1.0, -2.0]];
        let split = sign_split(&b);
        assert_eq!(split.plus, array![[1.0, 0.0]]);
        assert_eq!(split.minus, array![[0.0, 2.0]]);
    }

    #[test]
    fn sign_split_zero_matrix() {
        let b = Array2::<f64>::zeros((3, 2));
        let split = sign_split(&b);
        assert_eq!(split.plus, b);
        assert_eq!(split.minus, b);
    }

    #[test]
    fn sign_split_round_trip_random() {
        // Element-loop oracle on a fixed pseudo-random 5x4 matrix.
        let b = Array2::from_shape_fn((5, 4), |(i, j)| ((i * 7 + j * 3) as f64 * 0.37).sin() * 4.0);
        let split = sign_split(&b);
        for ((i, j), &v) in b.indexed_iter() {
            assert_eq!(split.plus[[i, j]] - split.minus[[i, j]], v);
            assert_eq!(split.plus[[i, j]] * split.minus[[i, j]], 0.0);
        }
    }

    #[test]
    fn mul_div_floor_arithmetic() {
        let x = array![[1.0, 2.0]];
        let num = array![[2.0, 2.0]];
        let den = array![[1.0, 4.0]];
        let out = mul_div_floor(&x, &num, &den, DEFAULT_FLOOR).unwrap();
        assert_eq!(out, array![[2.0, 1.0]]);
    }

    #[test]
    fn mul_div_floor_clamps_zero_denominator() {
        let x = array![[1.0]];
        let num = array![[1.0]];
        let den = array![[0.0]];
        let out = mul_div_floor(&x, &num, &den, 1e-16).unwrap();
        assert!(out[[0, 0]].is_finite());
        assert_eq!(out[[0, 0]], 1.0 / 1e-16);
    }

    #[test]
    fn mul_div_floor_shape_mismatch() {
        let x = array![[1.0, 2.0]];
        let bad = array![[1.0]];
        assert!(matches!(
            mul_div_floor(&x, &bad, &x, 1e-16),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn mul_div_floor_matches_scalar_loop() {
        let x = Array2::from_shape_fn((4, 3), |(i, j)| (i + j) as f64 * 0.5 + 0.1);
        let num = Array2::from_shape_fn((4, 3), |(i, j)| (i * 3 + j) as f64 * 0.2 + 0.3);
        let den = Array2::from_shape_fn((4, 3), |(i, j)| (i + 2 * j) as f64 * 0.7 + 0.05);
        let out = mul_div_floor(&x, &num, &den, DEFAULT_FLOOR).unwrap();
        for ((i, j), &v) in out.indexed_iter() {
            let expect = x[[i, j]] * num[[i, j]] / den[[i, j]].max(DEFAULT_FLOOR);
            assert_eq!(v, expect);
        }
    }

    #[test]
    fn weighted_norm_identity_is_frobenius() {
        let w = Array2::from_shape_fn((4, 3), |(i, j)| (i as f64 - j as f64) * 0.31 + 0.4);
        let eye = Array2::eye(3);
        let wn = weighted_norm(&w, &eye).unwrap();
        assert!((wn - frob_norm(&w)).abs() <= 1e-14 * frob_norm(&w));
    }

    #[test]
    fn weighted_norm_rank_one_weight() {
        // A = e1 e1^T picks out the first column of W.
        let w = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let h = array![1.0, 0.0];
        let a = outer(&h, &h);
        let wn = weighted_norm(&w, &a).unwrap();
        let col0 = (1.0f64 + 9.0 + 25.0).sqrt();
        assert!((wn - col0).abs() < 1e-14 * col0);
    }

    #[test]
    fn weighted_norm_matches_trace_oracle() {
        let w = Array2::from_shape_fn((5, 3), |(i, j)| ((i * 5 + j) as f64 * 0.23).cos() + 1.2);
        let h = array![0.3, 1.1, 0.7];
        let a = outer(&h, &h);
        // trace(W^T W A) = ||W h||^2 for rank-1 A = h h^T
        let wh = w.dot(&h);
        let expect = wh.dot(&wh).sqrt();
        let wn = weighted_norm(&w, &a).unwrap();
        assert!((wn - expect).abs() <= 1e-12 * expect.max(1.0));
    }

    #[test]
    fn weighted_norm_rejects_indefinite_weight() {
        let w = array![[1.0, 0.0]];
        let a = array![[-1.0, 0.0], [0.0, 1.0]];
        assert!(matches!(weighted_norm(&w, &a), Err(Error::NotPsd(_))));
    }

    #[test]
    fn normalize_columns_triangle() {
        let m = array![[3.0], [4.0]];
        let (out, scales) = normalize_columns(&m).unwrap();
        assert_eq!(out, array![[0.6], [0.8]]);
        assert_eq!(scales, vec![5.0]);
    }

    #[test]
    fn normalize_columns_unit_input_is_identity() {
        let m = array![[1.0, 0.0], [0.0, 1.0]];
        let (out, scales) = normalize_columns(&m).unwrap();
        assert_eq!(out, m);
        assert_eq!(scales, vec![1.0, 1.0]);
    }

    #[test]
    fn normalize_columns_rejects_zero_column() {
        let m = array![[1.0, 0.0], [1.0, 0.0]];
        assert_eq!(normalize_columns(&m), Err(Error::ZeroColumn(1)));
    }

    #[test]
    fn normalize_columns_norm_oracle() {
        let m = Array2::from_shape_fn((6, 4), |(i, j)| {
            ((i + j * 5) as f64 * 0.11).sin().abs() + 0.2
        });
        let (out, scales) = normalize_columns(&m).unwrap();
        for j in 0..4 {
            let norm = out.column(j).dot(&out.column(j)).sqrt();
            assert!((norm - 1.0).abs() <= 1e-14);
            // reconstruction: out * diag(scales) = m
            for i in 0..6 {
                assert!((out[[i, j]] * scales[j] - m[[i, j]]).abs() <= 1e-14 * m[[i, j]].abs());
            }
        }
    }

    #[test]
    fn cholesky_accepts_pd_rejects_singular() {
        let a = array![[4.0, 2.0], [2.0, 3.0]];
        let l = cholesky(&a).unwrap();
        let back = l.dot(&l.t());
        for ((i, j), &v) in back.indexed_iter() {
            assert!((v - a[[i, j]]).abs() < 1e-14);
        }
        let singular = array![[1.0, 1.0], [1.0, 1.0]];
        assert!(cholesky(&singular).is_none());
    }

    proptest! {
        #[test]
        fn sign_split_round_trip(values in proptest::collection::vec(-1e6f64..1e6, 12)) {
            let b = Array2::from_shape_vec((3, 4), values).unwrap();
            let split = sign_split(&b);
            for ((i, j), &v) in b.indexed_iter() {
                prop_assert_eq!(split.plus[[i, j]] - split.minus[[i, j]], v);
                prop_assert_eq!(split.plus[[i, j]] * split.minus[[i, j]], 0.0);
            }
        }

        #[test]
        fn mul_div_floor_nonnegative(values in proptest::collection::vec(0.0f64..1e3, 18)) {
            let x = Array2::from_shape_vec((2, 3), values[0..6].to_vec()).unwrap();
            let num = Array2::from_shape_vec((2, 3), values[6..12].to_vec()).unwrap();
            let den = Array2::from_shape_vec((2, 3), values[12..18].to_vec()).unwrap();
            let out = mul_div_floor(&x, &num, &den, DEFAULT_FLOOR).unwrap();
            prop_assert!(out.iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn normalize_columns_idempotent(values in proptest::collection::vec(0.01f64..10.0, 12)) {
            let m = Array2::from_shape_vec((3, 4), values).unwrap();
            let (once, _) = normalize_columns(&m).unwrap();
            let (twice, scales) = normalize_columns(&once).unwrap();
            for (a, b) in once.iter().zip(twice.iter()) {
                prop_assert!((a - b).abs() <= 1e-14);
            }
            for s in scales {
                prop_assert!((s - 1.0).abs() <= 1e-14);
            }
        }
    }
}
