//! Command-line front end: factorization runs, synthetic data generation,
//! the recovery-grid experiment, and metric evaluation, all exchanging
//! plain CSV matrices.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::{Array1, Array2};

use chordal_core::nmf::{self, BcdConfig, IterationTrace, WSolver};
use chordal_harness::error::{HarnessError, Result};
use chordal_harness::grid::{self, GridConfig, Method};
use chordal_harness::synth::{self, SynthSpec};
use chordal_harness::{io, metrics};

#[derive(Parser)]
#[command(
    name = "chordal",
    about = "Nonnegative matrix factorization under the chordal (ray-to-ray) distance",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum WSolverKind {
    Epg,
    Fp,
    Avgrmu,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricKind {
    /// ||X - X_true||_F / ||X_true||_F
    RelError,
    /// Column-normalized, permutation-aligned basis error
    WAligned,
    /// Spectral information divergence times tangent of spectral angle
    SidSam,
}

#[derive(Args)]
struct SolverArgs {
    /// Factorization rank
    #[arg(long)]
    rank: usize,
    /// RNG seed for the uniform initialization
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Outer BCD iterations (or HALS sweeps)
    #[arg(long, default_value_t = 5000)]
    outer_iters: usize,
    /// Multiplicative updates per column solve
    #[arg(long, default_value_t = 25)]
    h_inner: usize,
    /// Basis-block solver
    #[arg(long, value_enum, default_value_t = WSolverKind::Epg)]
    w_solver: WSolverKind,
    /// Basis-solver iterations per outer iteration
    #[arg(long, default_value_t = 1)]
    w_steps: usize,
    /// Fixed projected-gradient stepsize (default: backtracking line search)
    #[arg(long)]
    epg_eta: Option<f64>,
}

impl SolverArgs {
    fn to_config(&self) -> BcdConfig {
        let w_solver = match self.w_solver {
            WSolverKind::Epg => WSolver::Epg {
                steps: self.w_steps,
            },
            WSolverKind::Fp => WSolver::Fp {
                steps: self.w_steps,
            },
            WSolverKind::Avgrmu => WSolver::AvgRmu {
                steps: self.w_steps,
            },
        };
        let mut cfg = BcdConfig {
            rank: self.rank,
            outer_iters: self.outer_iters,
            h_inner_iters: self.h_inner,
            w_solver,
            seed: self.seed,
            parallel_columns: grid::configured_threads() > 1,
            ..Default::default()
        };
        if let Some(eta) = self.epg_eta {
            cfg.epg_step_rule = chordal_core::EpgStepRule::Fixed { eta };
        }
        cfg
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the chordal factorization on a CSV matrix
    Factorize {
        #[command(flatten)]
        solver: SolverArgs,
        /// Input matrix (CSV, no header)
        #[arg(long)]
        input: PathBuf,
        /// Where to write the basis matrix W
        #[arg(long)]
        out_w: PathBuf,
        /// Where to write the coefficient matrix H (de-normalized;
        /// dropped zero columns come back as zero columns)
        #[arg(long)]
        out_h: PathBuf,
        /// Optional per-iteration trace CSV
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run the Frobenius HALS baseline on a CSV matrix
    BaselineHals {
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_w: PathBuf,
        #[arg(long)]
        out_h: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Generate the 3x6 synthetic cone instance
    Synth {
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        delta: f64,
        /// Where to write the data matrix M
        #[arg(long)]
        out: PathBuf,
        /// Optionally write the generating basis
        #[arg(long)]
        out_w: Option<PathBuf>,
        /// Optionally write the generating coefficients
        #[arg(long)]
        out_h: Option<PathBuf>,
    },
    /// Sweep the (epsilon, delta) grid with both methods
    Grid {
        /// Comma-separated epsilon values (default: 6 log-spaced in [1e-3, 0.3])
        #[arg(long)]
        epsilons: Option<String>,
        /// Comma-separated delta values (default: 6 log-spaced in [1e-3, 1])
        #[arg(long)]
        deltas: Option<String>,
        /// Comma-separated subset of {chordal, fro_hals}
        #[arg(long, default_value = "chordal,fro_hals")]
        methods: String,
        #[arg(long, default_value_t = 3)]
        rank: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        outer_iters: usize,
        #[arg(long, default_value_t = 25)]
        h_inner: usize,
        /// Fixed projected-gradient stepsize of the experiment protocol
        #[arg(long, default_value_t = 0.03)]
        epg_eta: f64,
        /// Feed the baseline the normalized matrix instead of the raw one
        #[arg(long)]
        fro_normalized: bool,
        /// Result CSV path
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a metric between two CSV files
    Metrics {
        #[arg(long, value_enum)]
        kind: MetricKind,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Entry floor applied before logarithms (sid-sam only)
        #[arg(long, default_value_t = 1e-12)]
        floor: f64,
    },
}

fn write_trace(path: &Path, trace: &IterationTrace) -> Result<()> {
    let mut out = String::from("iter,chordal_obj,fro_resid,h_time_s,w_time_s,max_feas_resid\n");
    for row in &trace.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.iteration,
            io::format_f64(row.chordal_objective),
            io::format_f64(row.frobenius_residual),
            io::format_f64(row.h_block_seconds),
            io::format_f64(row.w_block_seconds),
            io::format_f64(row.max_feasibility_residual),
        ));
    }
    std::fs::write(path, out).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Accepts a row or column vector CSV as a 1-D spectrum.
fn read_vector(path: &Path) -> Result<Array1<f64>> {
    let m = io::read_matrix(path)?;
    if m.nrows() != 1 && m.ncols() != 1 {
        return Err(HarnessError::Invalid(format!(
            "{}: expected a vector, got {}x{}",
            path.display(),
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(Array1::from_iter(m.iter().copied()))
}

fn parse_float_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| HarnessError::Invalid(format!("bad {what} value: {tok:?}")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Factorize {
            solver,
            input,
            out_w,
            out_h,
            trace,
        } => {
            let m_raw = io::read_matrix(&input)?;
            let pre = nmf::preprocess(&m_raw)?;
            let cfg = solver.to_config();
            let init =
                nmf::init_uniform(pre.matrix.nrows(), cfg.rank, pre.matrix.ncols(), cfg.seed);
            let (pair, iter_trace) = nmf::bcd_solve(&pre.matrix, &cfg, &init)?;
            // De-normalize: scale the coefficients back and restore dropped
            // zero columns as zero coefficient columns.
            let mut h_full = Array2::zeros((cfg.rank, m_raw.ncols()));
            for (out_j, &j) in pre.kept_columns.iter().enumerate() {
                let scaled = pair.h.column(out_j).mapv(|v| v * pre.scales[out_j]);
                h_full.column_mut(j).assign(&scaled);
            }
            io::write_matrix(&out_w, &pair.w)?;
            io::write_matrix(&out_h, &h_full)?;
            if let Some(path) = trace {
                write_trace(&path, &iter_trace)?;
            }
            println!(
                "final chordal objective: {}",
                iter_trace.final_objective().unwrap_or(f64::NAN)
            );
        }
        Command::BaselineHals {
            solver,
            input,
            out_w,
            out_h,
            trace,
        } => {
            let m_raw = io::read_matrix(&input)?;
            let cfg = solver.to_config();
            let init = nmf::init_uniform(m_raw.nrows(), cfg.rank, m_raw.ncols(), cfg.seed);
            let (pair, iter_trace) = nmf::hals_fro_nmf(&m_raw, cfg.rank, cfg.outer_iters, &init)?;
            io::write_matrix(&out_w, &pair.w)?;
            io::write_matrix(&out_h, &pair.h)?;
            if let Some(path) = trace {
                write_trace(&path, &iter_trace)?;
            }
            let last = iter_trace.rows.last();
            println!(
                "final frobenius residual: {}",
                last.map(|r| r.frobenius_residual).unwrap_or(f64::NAN)
            );
        }
        Command::Synth {
            epsilon,
            delta,
            out,
            out_w,
            out_h,
        } => {
            let inst = synth::synth_generate(SynthSpec::new(epsilon, delta)?)?;
            io::write_matrix(&out, &inst.matrix)?;
            if let Some(path) = out_w {
                io::write_matrix(&path, &inst.w_true)?;
            }
            if let Some(path) = out_h {
                io::write_matrix(&path, &inst.h_true)?;
            }
        }
        Command::Grid {
            epsilons,
            deltas,
            methods,
            rank,
            seed,
            outer_iters,
            h_inner,
            epg_eta,
            fro_normalized,
            out,
        } => {
            let epsilons = match epsilons {
                Some(text) => parse_float_list(&text, "epsilon")?,
                None => synth::default_epsilon_grid(),
            };
            let deltas = match deltas {
                Some(text) => parse_float_list(&text, "delta")?,
                None => synth::default_delta_grid(),
            };
            let methods: Vec<Method> = methods
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| {
                    Method::parse(s.trim())
                        .ok_or_else(|| HarnessError::Invalid(format!("unknown method {s:?}")))
                })
                .collect::<Result<_>>()?;
            let mut cfg = GridConfig::default_experiment();
            cfg.bcd.rank = rank;
            cfg.bcd.outer_iters = outer_iters;
            cfg.bcd.h_inner_iters = h_inner;
            cfg.bcd.epg_step_rule = chordal_core::EpgStepRule::Fixed { eta: epg_eta };
            cfg.fro_on_normalized = fro_normalized;
            let result = grid::grid_sweep(&epsilons, &deltas, &methods, &cfg, seed);
            std::fs::write(&out, result.to_csv()).map_err(|source| HarnessError::Io {
                path: out.display().to_string(),
                source,
            })?;
            let failures = result.cells.iter().filter(|c| c.failure.is_some()).count();
            println!("{} cells written, {failures} failures", result.cells.len());
        }
        Command::Metrics {
            kind,
            input,
            truth,
            floor,
        } => match kind {
            MetricKind::RelError => {
                let x = io::read_matrix(&input)?;
                let x_true = io::read_matrix(&truth)?;
                println!("{}", metrics::rel_error(&x, &x_true)?);
            }
            MetricKind::WAligned => {
                let w = io::read_matrix(&input)?;
                let w_true = io::read_matrix(&truth)?;
                println!("{}", metrics::w_aligned_error(&w, &w_true)?);
            }
            MetricKind::SidSam => {
                let t = read_vector(&input)?;
                let r = read_vector(&truth)?;
                let (value, floored) = metrics::sid_sam(&t, &r, floor)?;
                println!("{value}");
                if floored {
                    eprintln!("note: zero channels floored at {floor:e} before logarithms");
                }
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
