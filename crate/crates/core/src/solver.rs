//! Update rules (EMU, RMU, EPG, fractional programming, avgRMU) and the
//! per-subproblem iteration drivers.

use std::time::Instant;

use ndarray::{Array, Array1, Array2, Dimension, Ix1, Ix2};

use crate::error::{Error, Result};
use crate::gradient::{self, GradSplit};
use crate::manifold::{EllipsoidManifold, SpectrahedronShell, MEMBERSHIP_TOL};
use crate::matrix::{self, DEFAULT_FLOOR};

/// Stepsize rule for the projected-gradient drivers.
#[derive(Debug, Clone, PartialEq)]
pub enum EpgStepRule {
    Fixed {
        eta: f64,
    },
    /// Halving line search accepting the first step with sufficient
    /// increase of the maximized objective.
    Backtracking {
        eta0: f64,
        shrink: f64,
        sufficient_increase: f64,
        max_halvings: u32,
    },
}

impl Default for EpgStepRule {
    fn default() -> Self {
        EpgStepRule::Backtracking {
            eta0: 1.0,
            shrink: 0.5,
            sufficient_increase: 1e-4,
            max_halvings: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Iteration cap (default 1e5, the protocol cap of the solver tests).
    pub max_iters: usize,
    /// Stop when the iterate change drops to this (default 1e-12).
    pub step_tol: f64,
    /// Denominator clamp for element-wise divisions.
    pub floor: f64,
    pub epg_step_rule: EpgStepRule,
    /// Carried for reproducibility bookkeeping; the drivers themselves are
    /// deterministic.
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 100_000,
            step_tol: 1e-12,
            floor: DEFAULT_FLOOR,
            epg_step_rule: EpgStepRule::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations_used: usize,
    pub final_objective: f64,
    /// Objective value at the start plus after every iteration;
    /// length is `iterations_used + 1`.
    pub objective_trace: Vec<f64>,
    pub feasibility_residual: f64,
    pub wall_time_seconds: f64,
}

/// Inner cap of the parametric subproblem inside one fractional-programming
/// outer iteration.
const FP_INNER_CAP: usize = 50;

/// Manifolds the multiplicative update can renormalize onto.
pub trait RmuManifold {
    type Dim: Dimension;
    fn metric_norm(&self, v: &Array<f64, Self::Dim>) -> f64;
    fn membership_residual(&self, x: &Array<f64, Self::Dim>) -> f64;
}

impl RmuManifold for EllipsoidManifold {
    type Dim = Ix1;
    fn metric_norm(&self, v: &Array1<f64>) -> f64 {
        EllipsoidManifold::metric_norm(self, v)
    }
    fn membership_residual(&self, x: &Array1<f64>) -> f64 {
        self.residual(x)
    }
}

impl RmuManifold for SpectrahedronShell {
    type Dim = Ix2;
    fn metric_norm(&self, v: &Array2<f64>) -> f64 {
        SpectrahedronShell::metric_norm(self, v)
    }
    fn membership_residual(&self, x: &Array2<f64>) -> f64 {
        self.residual(x)
    }
}

/// Euclidean multiplicative update `x . grad_minus ./ grad_plus` with the
/// denominator floored.
pub fn emu_step<D: Dimension>(
    x: &Array<f64, D>,
    grad_plus: &Array<f64, D>,
    grad_minus: &Array<f64, D>,
    floor: f64,
) -> Result<Array<f64, D>> {
    matrix::mul_div_floor(x, grad_minus, grad_plus, floor)
}

/// Riemannian multiplicative update: the EMU step followed by the metric
/// retraction. Keeps the iterate nonnegative and on the manifold.
pub fn rmu_step<M: RmuManifold>(
    manifold: &M,
    x: &Array<f64, M::Dim>,
    split: &GradSplit<M::Dim>,
    floor: f64,
) -> Result<Array<f64, M::Dim>> {
    if x.iter().any(|&v| v < 0.0) {
        return Err(Error::Precondition(
            "RMU iterate must be nonnegative".into(),
        ));
    }
    let res = manifold.membership_residual(x);
    if res.abs() > MEMBERSHIP_TOL {
        return Err(Error::OffManifold(res));
    }
    let z = matrix::mul_div_floor(x, &split.minus, &split.plus, floor)?;
    let norm = manifold.metric_norm(&z);
    if norm < floor {
        return Err(Error::Stall);
    }
    Ok(z / norm)
}

/// Stall recovery shared by the iteration drivers: add the floor to every
/// entry and renormalize.
fn perturb_onto<M: RmuManifold>(
    manifold: &M,
    x: &Array<f64, M::Dim>,
    floor: f64,
) -> Result<Array<f64, M::Dim>> {
    let bumped = x.mapv(|v| v + floor);
    let norm = manifold.metric_norm(&bumped);
    if norm < floor {
        return Err(Error::Stall);
    }
    Ok(bumped / norm)
}

fn step_norm<D: Dimension>(a: &Array<f64, D>, b: &Array<f64, D>) -> f64 {
    ndarray::Zip::from(a)
        .and(b)
        .fold(0.0, |acc, &x, &y| acc + (x - y) * (x - y))
        .sqrt()
}

/// Runs RMU for one coefficient column on a prebuilt ellipsoid.
///
/// `back` is the back-projected data column `W^T m_j`; the iterate starts
/// from `h0` renormalized onto the manifold.
pub(crate) fn solve_h_on(
    manifold: &EllipsoidManifold,
    back: &Array1<f64>,
    h0: &Array1<f64>,
    opts: &SolverOptions,
) -> Result<(Array1<f64>, SolveReport)> {
    if h0.iter().any(|&v| v < 0.0) {
        return Err(Error::Precondition("h0 must be nonnegative".into()));
    }
    let start = Instant::now();
    let norm0 = manifold.metric_norm(h0);
    if norm0 < opts.floor {
        return Err(Error::Precondition("W h0 must be nonzero".into()));
    }
    let mut h = h0 / norm0;
    let objective = |h: &Array1<f64>| 1.0 - back.dot(h);
    let mut trace = vec![objective(&h)];
    let mut iterations = 0;
    for _ in 0..opts.max_iters {
        let split = gradient::h_grad_split_on(manifold.gram(), back, &h)?;
        let next = match rmu_step(manifold, &h, &split, opts.floor) {
            Ok(v) => v,
            Err(Error::Stall) => perturb_onto(manifold, &h, opts.floor)?,
            Err(e) => return Err(e),
        };
        let step = step_norm(&next, &h);
        h = next;
        trace.push(objective(&h));
        iterations += 1;
        if step <= opts.step_tol {
            break;
        }
    }
    let report = SolveReport {
        iterations_used: iterations,
        final_objective: *trace.last().unwrap(),
        objective_trace: trace,
        feasibility_residual: manifold.residual(&h).abs(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((h, report))
}

/// Column subproblem `argmax_{h >= 0} <m_j, W h> / ||W h||` solved by RMU
/// on the ellipsoid of `W^T W`. The reported objective is the per-column
/// chordal distance `1 - cos`.
pub fn solve_h_subproblem(
    w: &Array2<f64>,
    data_col: &Array1<f64>,
    h0: &Array1<f64>,
    opts: &SolverOptions,
) -> Result<(Array1<f64>, SolveReport)> {
    let manifold = EllipsoidManifold::from_factor(w)?;
    let back = w.t().dot(data_col);
    solve_h_on(&manifold, &back, h0, opts)
}

/// Generic projected ascent step `max(0, x + eta * g)`.
fn project_ascent<D: Dimension>(x: &Array<f64, D>, g: &Array<f64, D>, eta: f64) -> Array<f64, D> {
    let mut out = x.clone();
    ndarray::Zip::from(&mut out)
        .and(g)
        .for_each(|o, &gi| *o = (*o + eta * gi).max(0.0));
    out
}

/// One backtracked (or fixed) projected-ascent step on an objective to be
/// maximized. Returns the accepted candidate, or `x` unchanged when no
/// step passes the sufficient-increase test.
fn epg_ascent_step<D, F>(
    x: &Array<f64, D>,
    g: &Array<f64, D>,
    value: f64,
    rule: &EpgStepRule,
    eval: F,
) -> Array<f64, D>
where
    D: Dimension,
    F: Fn(&Array<f64, D>) -> Option<f64>,
{
    match rule {
        EpgStepRule::Fixed { eta } => project_ascent(x, g, *eta),
        EpgStepRule::Backtracking {
            eta0,
            shrink,
            sufficient_increase,
            max_halvings,
        } => {
            let mut eta = *eta0;
            for _ in 0..=*max_halvings {
                let candidate = project_ascent(x, g, eta);
                let predicted = ndarray::Zip::from(g)
                    .and(&candidate)
                    .and(x)
                    .fold(0.0, |acc, &gi, &ci, &xi| acc + gi * (ci - xi));
                if let Some(v) = eval(&candidate) {
                    if v >= value + sufficient_increase * predicted && v >= value {
                        return candidate;
                    }
                }
                eta *= shrink;
            }
            x.clone()
        }
    }
}

/// Euclidean projected-gradient baseline for the column subproblem:
/// projected ascent on `<m_j, W h> / ||W h||` over the nonnegative orthant.
/// Reported objectives match `solve_h_subproblem` (per-column chordal
/// distance), so the two drivers are directly comparable.
pub fn solve_h_subproblem_epg(
    w: &Array2<f64>,
    data_col: &Array1<f64>,
    h0: &Array1<f64>,
    opts: &SolverOptions,
) -> Result<(Array1<f64>, SolveReport)> {
    if h0.iter().any(|&v| v < 0.0) {
        return Err(Error::Precondition("h0 must be nonnegative".into()));
    }
    let start = Instant::now();
    let zero_m = Array1::zeros(w.nrows());
    let cosine = |h: &Array1<f64>| -> Option<f64> {
        let wh = w.dot(h);
        let norm = wh.dot(&wh).sqrt();
        if norm < opts.floor {
            return None;
        }
        Some(data_col.dot(&wh) / norm)
    };
    let norm0 = {
        let wh = w.dot(h0);
        wh.dot(&wh).sqrt()
    };
    if norm0 < opts.floor {
        return Err(Error::Precondition("W h0 must be nonzero".into()));
    }
    let mut h = h0 / norm0;
    let mut value = cosine(&h).ok_or(Error::Stall)?;
    let mut trace = vec![1.0 - value];
    let mut iterations = 0;
    for _ in 0..opts.max_iters {
        let g = gradient::quotient_grad(w, &zero_m, data_col, w, &zero_m, &h)?;
        let next = epg_ascent_step(&h, &g, value, &opts.epg_step_rule, cosine);
        let step = step_norm(&next, &h);
        h = next;
        value = cosine(&h).ok_or(Error::Stall)?;
        trace.push(1.0 - value);
        iterations += 1;
        if step <= opts.step_tol {
            break;
        }
    }
    let report = SolveReport {
        iterations_used: iterations,
        final_objective: *trace.last().unwrap(),
        objective_trace: trace,
        feasibility_residual: 0.0,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((h, report))
}

/// Projected-gradient kernel `max(0, w - eta * descent_grad)`, the raw
/// update written in descent form. Ascent drivers pass the negated
/// gradient of the maximized objective.
pub fn epg_step_w(w: &Array2<f64>, descent_grad: &Array2<f64>, eta: f64) -> Result<Array2<f64>> {
    matrix::check_same_shape(w, descent_grad)?;
    Ok(project_ascent(w, &descent_grad.mapv(|v| -v), eta))
}

fn check_w0(w0: &Array2<f64>) -> Result<()> {
    if w0.iter().any(|&v| v < 0.0) {
        return Err(Error::Precondition("W0 must be nonnegative".into()));
    }
    if w0.iter().all(|&v| v == 0.0) {
        return Err(Error::Stall);
    }
    Ok(())
}

/// Basis subproblem by projected gradient ascent on the ratio-sum
/// objective. With the backtracking rule the objective trace is
/// non-decreasing.
pub fn solve_w_subproblem_epg(
    w0: &Array2<f64>,
    shells: &[SpectrahedronShell],
    opts: &SolverOptions,
) -> Result<(Array2<f64>, SolveReport)> {
    check_w0(w0)?;
    let start = Instant::now();
    let mut w = w0.clone();
    let mut value = gradient::w_ratio_sum(&w, shells)?;
    let mut trace = vec![value];
    let mut iterations = 0;
    for _ in 0..opts.max_iters {
        let g = gradient::w_euclidean_grad(&w, shells)?;
        let next = epg_ascent_step(&w, &g, value, &opts.epg_step_rule, |cand| {
            gradient::w_ratio_sum(cand, shells).ok()
        });
        let step = step_norm(&next, &w);
        w = next;
        value = gradient::w_ratio_sum(&w, shells)?;
        trace.push(value);
        iterations += 1;
        if step <= opts.step_tol {
            break;
        }
    }
    let report = SolveReport {
        iterations_used: iterations,
        final_objective: value,
        objective_trace: trace,
        feasibility_residual: 0.0,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((w, report))
}

/// Basis subproblem by fractional programming: per-term Dinkelbach
/// parameters `lambda_j = <B_j, W>_F / sqrt(<W, W A_j>_F)` held fixed
/// while an inner projected-ascent pass maximizes the parametric
/// objective `sum_j (<B_j, W>_F - lambda_j sqrt(<W, W A_j>_F))`.
///
/// Outer iterations stop when no parameter moves more than `step_tol`.
/// A candidate that fails to improve the ratio-sum itself is rejected and
/// the iteration terminates, which keeps the reported trace monotone.
pub fn solve_w_subproblem_fp(
    w0: &Array2<f64>,
    shells: &[SpectrahedronShell],
    opts: &SolverOptions,
) -> Result<(Array2<f64>, SolveReport)> {
    check_w0(w0)?;
    let start = Instant::now();

    let lambdas = |w: &Array2<f64>| -> Result<Vec<f64>> {
        shells
            .iter()
            .enumerate()
            .map(|(j, shell)| {
                let d = shell.metric_norm(w);
                if d * d < opts.floor {
                    return Err(Error::Singularity { term: j });
                }
                Ok(matrix::frob_inner(shell.data(), w) / d)
            })
            .collect()
    };
    let parametric = |w: &Array2<f64>, lam: &[f64]| -> Option<f64> {
        let mut total = 0.0;
        for (shell, &l) in shells.iter().zip(lam) {
            let d = shell.metric_norm(w);
            if d * d < opts.floor {
                return None;
            }
            total += matrix::frob_inner(shell.data(), w) - l * d;
        }
        Some(total)
    };
    let parametric_grad = |w: &Array2<f64>, lam: &[f64]| -> Result<Array2<f64>> {
        let mut g = Array2::<f64>::zeros(w.raw_dim());
        for (j, (shell, &l)) in shells.iter().zip(lam).enumerate() {
            let d = shell.metric_norm(w);
            if d * d < opts.floor {
                return Err(Error::Singularity { term: j });
            }
            g = g + shell.data() - &(shell.z_constraint(w) * (l / d));
        }
        Ok(g)
    };

    let mut w = w0.clone();
    let mut lam = lambdas(&w)?;
    let mut value = gradient::w_ratio_sum(&w, shells)?;
    let mut trace = vec![value];
    let mut iterations = 0;
    for _ in 0..opts.max_iters {
        // inner parametric ascent
        let mut inner = w.clone();
        let mut inner_value = parametric(&inner, &lam).ok_or(Error::Stall)?;
        for _ in 0..FP_INNER_CAP {
            let g = parametric_grad(&inner, &lam)?;
            let next = epg_ascent_step(&inner, &g, inner_value, &opts.epg_step_rule, |cand| {
                parametric(cand, &lam)
            });
            let step = step_norm(&next, &inner);
            inner = next;
            inner_value = parametric(&inner, &lam).ok_or(Error::Stall)?;
            if step <= opts.step_tol {
                break;
            }
        }
        let candidate_value = gradient::w_ratio_sum(&inner, shells)?;
        if candidate_value < value {
            break;
        }
        w = inner;
        value = candidate_value;
        let next_lam = lambdas(&w)?;
        let delta = lam
            .iter()
            .zip(&next_lam)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        lam = next_lam;
        trace.push(value);
        iterations += 1;
        if delta <= opts.step_tol {
            break;
        }
    }
    let report = SolveReport {
        iterations_used: iterations,
        final_objective: value,
        objective_trace: trace,
        feasibility_residual: 0.0,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((w, report))
}

/// Consensus-averaging multiplicative update: on every iteration the
/// common iterate is renormalized onto each shell, a single RMU candidate
/// is computed there, and the candidates are averaged arithmetically.
/// Shells whose renormalization or update degenerates are dropped for
/// that iteration.
pub fn solve_w_avgrmu(
    w0: &Array2<f64>,
    shells: &[SpectrahedronShell],
    opts: &SolverOptions,
) -> Result<(Array2<f64>, SolveReport)> {
    check_w0(w0)?;
    let start = Instant::now();
    let mut w = w0.clone();
    let mut trace = vec![gradient::w_ratio_sum_lenient(&w, shells)];
    let mut iterations = 0;
    for _ in 0..opts.max_iters {
        let mut sum = Array2::<f64>::zeros(w.raw_dim());
        let mut kept = 0usize;
        for shell in shells {
            let norm = shell.metric_norm(&w);
            if norm < opts.floor {
                continue;
            }
            let z = &w / norm;
            let split = match gradient::w_grad_split_n1(shell, &z) {
                Ok(s) => s,
                Err(Error::DegenerateDirection) => continue,
                Err(e) => return Err(e),
            };
            match rmu_step(shell, &z, &split, opts.floor) {
                Ok(candidate) => {
                    sum += &candidate;
                    kept += 1;
                }
                Err(Error::Stall) => continue,
                Err(e) => return Err(e),
            }
        }
        if kept == 0 {
            return Err(Error::Stall);
        }
        let next = sum / kept as f64;
        let step = step_norm(&next, &w);
        w = next;
        trace.push(gradient::w_ratio_sum_lenient(&w, shells));
        iterations += 1;
        if step <= opts.step_tol {
            break;
        }
    }
    let report = SolveReport {
        iterations_used: iterations,
        final_objective: *trace.last().unwrap(),
        objective_trace: trace,
        feasibility_residual: 0.0,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((w, report))
}
