//! Experiment harness for the chordal factorization library: CSV matrix
//! I/O, synthetic instances, evaluation metrics, the recovery-grid sweep,
//! and the subproblem solver comparison.

pub mod error;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod shootout;
pub mod synth;

pub use error::{HarnessError, Result};
pub use grid::{grid_sweep, GridCell, GridConfig, GridResult, Method};
pub use metrics::{rel_error, sid_sam, w_aligned_error};
pub use synth::{synth_generate, SynthInstance, SynthSpec};
