//! Problem-level API: preprocessing, initialization, the block coordinate
//! descent loop, and the HALS Frobenius-NMF baseline.

use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gradient::{self, chordal_objective};
use crate::manifold::{EllipsoidManifold, SpectrahedronShell};
use crate::matrix::{self, DEFAULT_FLOOR};
use crate::solver::{self, EpgStepRule, SolverOptions};

/// A nonnegative factor pair `(W, H)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub w: Array2<f64>,
    pub h: Array2<f64>,
}

/// Which solver updates the basis block inside BCD, with its per-outer
/// iteration budget. The defaults follow the full-pipeline protocol:
/// one matrix-wise EPG step per outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum WSolver {
    Epg { steps: usize },
    Fp { steps: usize },
    AvgRmu { steps: usize },
}

impl Default for WSolver {
    fn default() -> Self {
        WSolver::Epg { steps: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcdConfig {
    pub rank: usize,
    pub outer_iters: usize,
    /// Multiplicative-update budget per column solve (default 25).
    pub h_inner_iters: usize,
    pub w_solver: WSolver,
    pub seed: u64,
    pub step_tol: f64,
    pub floor: f64,
    pub epg_step_rule: EpgStepRule,
    /// Optional early stop on the change of the chordal objective;
    /// disabled by default to keep the fixed-iteration protocol.
    pub early_stop_tol: Option<f64>,
    /// Solve the independent column subproblems in a parallel map over a
    /// frozen basis. Column writes are disjoint and reductions stay
    /// serial, so results are identical to the serial path.
    pub parallel_columns: bool,
}

impl Default for BcdConfig {
    fn default() -> Self {
        Self {
            rank: 1,
            outer_iters: 5000,
            h_inner_iters: 25,
            w_solver: WSolver::default(),
            seed: 0,
            step_tol: 1e-12,
            floor: DEFAULT_FLOOR,
            epg_step_rule: EpgStepRule::default(),
            early_stop_tol: None,
            parallel_columns: false,
        }
    }
}

/// Per-outer-iteration measurements.
///
/// The feasibility residual is taken right after the column sweep, against
/// the basis the sweep used; objective and Frobenius residual are taken at
/// the end of the iteration after the coefficients are renormalized onto
/// the updated basis.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub chordal_objective: f64,
    pub frobenius_residual: f64,
    pub h_block_seconds: f64,
    pub w_block_seconds: f64,
    pub max_feasibility_residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    pub rows: Vec<TraceRow>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.rows.last().map(|r| r.chordal_objective)
    }
}

/// A column-normalized data matrix together with what is needed to undo
/// the normalization.
#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub matrix: Array2<f64>,
    /// Original Euclidean norm of each kept column.
    pub scales: Vec<f64>,
    /// Indices (into the raw matrix) of the retained nonzero columns.
    pub kept_columns: Vec<usize>,
}

/// Drops zero columns, scales the rest to unit norm, and records the
/// scales and surviving indices.
pub fn preprocess(m_raw: &Array2<f64>) -> Result<Preprocessed> {
    if m_raw.iter().any(|&v| v < 0.0) {
        return Err(Error::Precondition(
            "data matrix must be nonnegative".into(),
        ));
    }
    let kept: Vec<usize> = (0..m_raw.ncols())
        .filter(|&j| m_raw.column(j).iter().any(|&v| v != 0.0))
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyProblem);
    }
    let mut compact = Array2::zeros((m_raw.nrows(), kept.len()));
    for (out_j, &j) in kept.iter().enumerate() {
        compact.column_mut(out_j).assign(&m_raw.column(j));
    }
    let (matrix, scales) = matrix::normalize_columns(&compact)?;
    Ok(Preprocessed {
        matrix,
        scales,
        kept_columns: kept,
    })
}

/// Seeded uniform-[0,1] initialization of both factors; identical seeds
/// give bit-identical pairs.
pub fn init_uniform(rows: usize, rank: usize, cols: usize, seed: u64) -> FactorPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = Array2::from_shape_vec(
        (rows, rank),
        (0..rows * rank).map(|_| rng.random::<f64>()).collect(),
    )
    .expect("shape matches generated length");
    let h = Array2::from_shape_vec(
        (rank, cols),
        (0..rank * cols).map(|_| rng.random::<f64>()).collect(),
    )
    .expect("shape matches generated length");
    FactorPair { w, h }
}

/// Scales column `j` of `h` so that `||W h_j|| = 1`, recovering from
/// vanished reconstructions by perturbing the column.
fn renormalize_column(w: &Array2<f64>, h: &mut Array2<f64>, j: usize, floor: f64) -> Result<()> {
    let norm = {
        let wh = w.dot(&h.column(j));
        wh.dot(&wh).sqrt()
    };
    if norm >= floor {
        h.column_mut(j).mapv_inplace(|v| v / norm);
        return Ok(());
    }
    log::warn!("column {j} reconstructs to zero; perturbing");
    h.column_mut(j).mapv_inplace(|v| v + floor);
    let norm = {
        let wh = w.dot(&h.column(j));
        wh.dot(&wh).sqrt()
    };
    if norm >= floor {
        h.column_mut(j).mapv_inplace(|v| v / norm);
        return Ok(());
    }
    h.column_mut(j).fill(1.0);
    let norm = {
        let wh = w.dot(&h.column(j));
        wh.dot(&wh).sqrt()
    };
    if norm < floor {
        return Err(Error::Stall);
    }
    h.column_mut(j).mapv_inplace(|v| v / norm);
    Ok(())
}

/// Builds the coefficient ellipsoid of `w`, recovering from rank
/// deficiency by adding `floor * max entry` to all entries (escalated a
/// few times before giving up).
fn ellipsoid_with_recovery(w: &mut Array2<f64>, floor: f64) -> Result<EllipsoidManifold> {
    for attempt in 0..4 {
        match EllipsoidManifold::from_factor(w) {
            Ok(e) => return Ok(e),
            Err(Error::NotPositiveDefinite) if attempt < 3 => {
                let max_entry = w.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1.0);
                let bump = floor * max_entry * 10f64.powi(4 * attempt);
                log::warn!("rank-deficient basis; perturbing by {bump:e}");
                w.mapv_inplace(|v| v + bump);
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::NotPositiveDefinite)
}

fn check_unit_columns(m: &Array2<f64>) -> Result<()> {
    for j in 0..m.ncols() {
        let norm = m.column(j).dot(&m.column(j)).sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::Precondition(format!(
                "data column {j} has norm {norm}; run preprocess first"
            )));
        }
    }
    Ok(())
}

/// Block coordinate descent: each outer iteration solves every column
/// subproblem by RMU (warm-started, `h_inner_iters` updates) and then
/// applies the configured basis solver.
pub fn bcd_solve(
    m: &Array2<f64>,
    cfg: &BcdConfig,
    init: &FactorPair,
) -> Result<(FactorPair, IterationTrace)> {
    check_unit_columns(m)?;
    let (rows, cols) = (m.nrows(), m.ncols());
    if cfg.rank == 0 || cfg.rank > rows.min(cols) {
        return Err(Error::Precondition(format!(
            "rank {} outside 1..={}",
            cfg.rank,
            rows.min(cols)
        )));
    }
    if init.w.nrows() != rows || init.w.ncols() != cfg.rank {
        return Err(Error::ShapeMismatch {
            expected: vec![rows, cfg.rank],
            found: vec![init.w.nrows(), init.w.ncols()],
        });
    }
    if init.h.nrows() != cfg.rank || init.h.ncols() != cols {
        return Err(Error::ShapeMismatch {
            expected: vec![cfg.rank, cols],
            found: vec![init.h.nrows(), init.h.ncols()],
        });
    }
    if init.w.iter().chain(init.h.iter()).any(|&v| v < 0.0) {
        return Err(Error::Precondition(
            "initialization must be nonnegative".into(),
        ));
    }

    let mut w = init.w.clone();
    let mut h = init.h.clone();
    let h_opts = SolverOptions {
        max_iters: cfg.h_inner_iters,
        step_tol: cfg.step_tol,
        floor: cfg.floor,
        epg_step_rule: cfg.epg_step_rule.clone(),
        seed: cfg.seed,
    };
    let w_opts = |steps: usize| SolverOptions {
        max_iters: steps,
        step_tol: 0.0,
        floor: cfg.floor,
        epg_step_rule: cfg.epg_step_rule.clone(),
        seed: cfg.seed,
    };

    // Start from a feasible point: every coefficient column on the
    // ellipsoid of the initial basis.
    for j in 0..cols {
        renormalize_column(&w, &mut h, j, cfg.floor)?;
    }
    let mut trace = IterationTrace::default();
    let feas_of = |e: &EllipsoidManifold, h: &Array2<f64>| {
        (0..cols)
            .map(|j| e.residual(&h.column(j).to_owned()).abs())
            .fold(0.0f64, f64::max)
    };
    {
        let e = ellipsoid_with_recovery(&mut w, cfg.floor)?;
        trace.rows.push(TraceRow {
            iteration: 0,
            chordal_objective: chordal_objective(m, &w, &h)?,
            frobenius_residual: matrix::frob_norm(&(m - &w.dot(&h))),
            h_block_seconds: 0.0,
            w_block_seconds: 0.0,
            max_feasibility_residual: feas_of(&e, &h),
        });
    }

    for k in 1..=cfg.outer_iters {
        // --- coefficient sweep over a frozen basis ---
        let h_clock = Instant::now();
        let manifold = ellipsoid_with_recovery(&mut w, cfg.floor)?;
        let back_all = w.t().dot(m);
        let solve_one = |j: usize, col: &Array1<f64>| -> Result<Array1<f64>> {
            let back = back_all.column(j).to_owned();
            Ok(solver::solve_h_on(&manifold, &back, col, &h_opts)?.0)
        };
        if cfg.parallel_columns {
            let solved: Vec<Result<Array1<f64>>> = (0..cols)
                .into_par_iter()
                .map(|j| solve_one(j, &h.column(j).to_owned()))
                .collect();
            for (j, res) in solved.into_iter().enumerate() {
                h.column_mut(j).assign(&res?);
            }
        } else {
            for j in 0..cols {
                let solved = solve_one(j, &h.column(j).to_owned())?;
                h.column_mut(j).assign(&solved);
            }
        }
        let h_seconds = h_clock.elapsed().as_secs_f64();
        let feas = feas_of(&manifold, &h);

        // --- basis update ---
        let w_clock = Instant::now();
        let shells: Vec<SpectrahedronShell> = (0..cols)
            .map(|j| {
                SpectrahedronShell::from_columns(&m.column(j).to_owned(), &h.column(j).to_owned())
            })
            .collect::<Result<_>>()?;
        w = match cfg.w_solver {
            WSolver::Epg { steps } => {
                solver::solve_w_subproblem_epg(&w, &shells, &w_opts(steps))?.0
            }
            WSolver::Fp { steps } => solver::solve_w_subproblem_fp(&w, &shells, &w_opts(steps))?.0,
            WSolver::AvgRmu { steps } => solver::solve_w_avgrmu(&w, &shells, &w_opts(steps))?.0,
        };
        let w_seconds = w_clock.elapsed().as_secs_f64();

        // coefficients back onto the new basis's ellipsoid
        for j in 0..cols {
            renormalize_column(&w, &mut h, j, cfg.floor)?;
        }
        let objective = chordal_objective(m, &w, &h)?;
        trace.rows.push(TraceRow {
            iteration: k,
            chordal_objective: objective,
            frobenius_residual: matrix::frob_norm(&(m - &w.dot(&h))),
            h_block_seconds: h_seconds,
            w_block_seconds: w_seconds,
            max_feasibility_residual: feas,
        });
        if let Some(tol) = cfg.early_stop_tol {
            let n = trace.rows.len();
            if n >= 2 && (trace.rows[n - 2].chordal_objective - objective).abs() < tol {
                break;
            }
        }
    }
    Ok((FactorPair { w, h }, trace))
}

/// Classical hierarchical alternating least squares for Frobenius NMF:
/// exact cyclic column updates of `W` and row updates of `H`, clamped to
/// the nonnegative orthant. The residual trace is non-increasing.
pub fn hals_fro_nmf(
    m_raw: &Array2<f64>,
    rank: usize,
    iters: usize,
    init: &FactorPair,
) -> Result<(FactorPair, IterationTrace)> {
    if m_raw.iter().any(|&v| v < 0.0) {
        return Err(Error::Precondition(
            "data matrix must be nonnegative".into(),
        ));
    }
    let (rows, cols) = (m_raw.nrows(), m_raw.ncols());
    if rank == 0 || rank > rows.min(cols) {
        return Err(Error::Precondition(format!(
            "rank {rank} outside 1..={}",
            rows.min(cols)
        )));
    }
    if init.w.nrows() != rows
        || init.w.ncols() != rank
        || init.h.nrows() != rank
        || init.h.ncols() != cols
    {
        return Err(Error::ShapeMismatch {
            expected: vec![rows, rank, rank, cols],
            found: vec![
                init.w.nrows(),
                init.w.ncols(),
                init.h.nrows(),
                init.h.ncols(),
            ],
        });
    }
    if init.w.iter().chain(init.h.iter()).any(|&v| v < 0.0) {
        return Err(Error::Precondition(
            "initialization must be nonnegative".into(),
        ));
    }

    let mut w = init.w.clone();
    let mut h = init.h.clone();
    let residual = |w: &Array2<f64>, h: &Array2<f64>| matrix::frob_norm(&(m_raw - &w.dot(h)));

    let mut trace = IterationTrace::default();
    trace.rows.push(TraceRow {
        iteration: 0,
        chordal_objective: gradient::cosine_distance_mean(m_raw, &w, &h),
        frobenius_residual: residual(&w, &h),
        h_block_seconds: 0.0,
        w_block_seconds: 0.0,
        max_feasibility_residual: 0.0,
    });

    for k in 1..=iters {
        let w_clock = Instant::now();
        let hht = h.dot(&h.t());
        let mht = m_raw.dot(&h.t());
        for l in 0..rank {
            let denom = hht[[l, l]].max(DEFAULT_FLOOR);
            let correction = (&mht.column(l) - &w.dot(&hht.column(l))) / denom;
            let mut col = w.column_mut(l);
            col += &correction;
            col.mapv_inplace(|v| v.max(0.0));
        }
        let w_seconds = w_clock.elapsed().as_secs_f64();

        let h_clock = Instant::now();
        let wtw = w.t().dot(&w);
        let wtm = w.t().dot(m_raw);
        for l in 0..rank {
            let denom = wtw[[l, l]].max(DEFAULT_FLOOR);
            let correction = (&wtm.row(l) - &wtw.row(l).dot(&h)) / denom;
            let mut row = h.row_mut(l);
            row += &correction;
            row.mapv_inplace(|v| v.max(0.0));
        }
        let h_seconds = h_clock.elapsed().as_secs_f64();

        trace.rows.push(TraceRow {
            iteration: k,
            chordal_objective: gradient::cosine_distance_mean(m_raw, &w, &h),
            frobenius_residual: residual(&w, &h),
            h_block_seconds: h_seconds,
            w_block_seconds: w_seconds,
            max_feasibility_residual: 0.0,
        });
    }
    Ok((FactorPair { w, h }, trace))
}
