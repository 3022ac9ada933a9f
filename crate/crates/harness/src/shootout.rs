//! Column-subproblem solver comparison on clipped-Gaussian instances:
//! multiplicative updates against the projected-gradient baseline, with
//! per-trial feasibility audits.

use chordal_core::solver::{self, SolverOptions};
use chordal_core::EllipsoidManifold;

use crate::synth::random_h_instance;

#[derive(Debug, Clone)]
pub struct ShootoutOutcome {
    pub trials: usize,
    /// Trials where the multiplicative-update iterate stayed nonnegative
    /// and on the ellipsoid (residual within 1e-8).
    pub rmu_feasible: usize,
    /// Trials where the step tolerance was reached before the cap.
    pub rmu_converged: usize,
    /// Trials where the multiplicative update finished within `tie_tol`
    /// of the better of the two final objectives.
    pub rmu_within_tol_of_best: usize,
    pub rmu_mean_iterations: f64,
    pub epg_mean_iterations: f64,
}

/// Runs `trials` independent instances of the column subproblem at the
/// given size with both solvers, from identical starts.
pub fn h_shootout(
    rows: usize,
    rank: usize,
    trials: usize,
    seed: u64,
    opts: &SolverOptions,
    epg_opts: &SolverOptions,
    tie_tol: f64,
) -> ShootoutOutcome {
    let mut outcome = ShootoutOutcome {
        trials,
        rmu_feasible: 0,
        rmu_converged: 0,
        rmu_within_tol_of_best: 0,
        rmu_mean_iterations: 0.0,
        epg_mean_iterations: 0.0,
    };
    for trial in 0..trials {
        let (w, m, h0) = random_h_instance(rows, rank, seed.wrapping_add(trial as u64));
        let (h_rmu, rep_rmu) =
            solver::solve_h_subproblem(&w, &m, &h0, opts).expect("RMU solve on a valid instance");
        let (_, rep_epg) = solver::solve_h_subproblem_epg(&w, &m, &h0, epg_opts)
            .expect("EPG solve on a valid instance");

        let manifold = EllipsoidManifold::from_factor(&w).expect("full rank by construction");
        if h_rmu.iter().all(|&v| v >= 0.0) && manifold.residual(&h_rmu).abs() <= 1e-8 {
            outcome.rmu_feasible += 1;
        }
        if rep_rmu.iterations_used < opts.max_iters {
            outcome.rmu_converged += 1;
        }
        let best = rep_rmu.final_objective.min(rep_epg.final_objective);
        if rep_rmu.final_objective <= best + tie_tol {
            outcome.rmu_within_tol_of_best += 1;
        }
        outcome.rmu_mean_iterations += rep_rmu.iterations_used as f64 / trials as f64;
        outcome.epg_mean_iterations += rep_epg.iterations_used as f64 / trials as f64;
    }
    outcome
}
