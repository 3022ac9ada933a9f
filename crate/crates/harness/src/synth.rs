//! Synthetic data: the 3x6 perturbed-and-attenuated cone instance and
//! clipped-Gaussian subproblem instances for the solver comparisons.

use ndarray::{array, Array1, Array2};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{HarnessError, Result};

/// Perturbation/attenuation parameters of the synthetic cone instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    /// How far the data columns deviate from the cone rays; in (0, 0.5).
    pub epsilon: f64,
    /// Downscaling of the even data columns; in (0, 1].
    pub delta: f64,
}

impl SynthSpec {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        let spec = Self { epsilon, delta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(HarnessError::Invalid(format!(
                "epsilon {} outside (0, 0.5)",
                self.epsilon
            )));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(HarnessError::Invalid(format!(
                "delta {} outside (0, 1]",
                self.delta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthInstance {
    pub matrix: Array2<f64>,
    pub w_true: Array2<f64>,
    pub h_true: Array2<f64>,
}

/// The fixed 3x3 cone basis of the synthetic experiments.
pub fn w_true() -> Array2<f64> {
    array![[0.8, 0.1, 0.1], [0.1, 0.8, 0.1], [0.1, 0.1, 0.8]]
}

/// Builds `M = W_true * H_true(eps, delta)` where the six coefficient
/// columns alternate between scale 1 and scale delta:
/// column 2k is `(eps, ..., 1-eps at k, ..., eps)`, column 2k+1 is delta
/// times the same.
pub fn synth_generate(spec: SynthSpec) -> Result<SynthInstance> {
    spec.validate()?;
    let (eps, delta) = (spec.epsilon, spec.delta);
    let w = w_true();
    let mut h = Array2::from_elem((3, 6), eps);
    for k in 0..3 {
        h[[k, 2 * k]] = 1.0 - eps;
        h[[k, 2 * k + 1]] = 1.0 - eps;
    }
    for j in [1, 3, 5] {
        h.column_mut(j).mapv_inplace(|v| v * delta);
    }
    let matrix = w.dot(&h);
    Ok(SynthInstance {
        matrix,
        w_true: w,
        h_true: h,
    })
}

/// Six log-spaced epsilon values in [1e-3, 0.3].
pub fn default_epsilon_grid() -> Vec<f64> {
    log_space(1e-3, 0.3, 6)
}

/// Six log-spaced delta values in [1e-3, 1].
pub fn default_delta_grid() -> Vec<f64> {
    log_space(1e-3, 1.0, 6)
}

pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2);
    let (llo, lhi) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(llo + (lhi - llo) * i as f64 / (count - 1) as f64))
        .collect()
}

/// Gaussian entries with negatives replaced by zero, the data model of
/// the subproblem comparisons.
pub fn clipped_gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_vec(
        (rows, cols),
        (0..rows * cols)
            .map(|_| {
                let v: f64 = StandardNormal.sample(rng);
                v.max(0.0)
            })
            .collect(),
    )
    .expect("shape matches generated length")
}

pub fn clipped_gaussian_vector(len: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    Array1::from_iter((0..len).map(|_| {
        let v: f64 = StandardNormal.sample(rng);
        v.max(0.0)
    }))
}

/// A random column-subproblem instance: a full-column-rank clipped
/// Gaussian basis, a unit nonnegative data column, and a positive start.
/// Degenerate draws are rejected and redrawn.
pub fn random_h_instance(
    rows: usize,
    rank: usize,
    seed: u64,
) -> (Array2<f64>, Array1<f64>, Array1<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let w = clipped_gaussian_matrix(rows, rank, &mut rng);
        if chordal_core::EllipsoidManifold::from_factor(&w).is_err() {
            continue;
        }
        let m = clipped_gaussian_vector(rows, &mut rng);
        let norm = m.dot(&m).sqrt();
        if norm == 0.0 {
            continue;
        }
        let m = m / norm;
        let h0 = Array1::from_iter((0..rank).map(|_| rng.random::<f64>() + 1e-3));
        let wh = w.dot(&h0);
        if wh.dot(&wh).sqrt() < 1e-8 {
            continue;
        }
        return (w, m, h0);
    }
}
