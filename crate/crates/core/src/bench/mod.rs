//! Metrics, scaling sweeps with power-law fits, loss decomposition and Hessian
//! spectrum reports, plus the CSV formats they are exchanged in.

mod io;
mod metrics;
mod predict;
mod report;
mod sweep;

use thiserror::Error;

pub use io::{fmt_f64, read_sweep_csv, write_history_csv, write_spectrum_csv, write_sweep_csv};
pub use metrics::{fit_power_law, relative_rmse, PowerLawFit, DEFAULT_FLOOR};
pub use predict::{Predictor, Standardized};
pub use report::{constructed_reference, gradient_mass_fractions, loss_decomposition_report, spectrum_report, LossBreakdown, Reference, SpectrumRow};
pub use sweep::{matched_width, run_scaling_sweep, run_scaling_sweep_with, Method, NnConfig, SweepConfig, SweepResult, SweepRow};

use crate::interp::InterpError;
use crate::net::NetError;
use crate::optim::OptimError;
use crate::targets::TargetError;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("predictions and targets must have equal nonzero length (got {preds} and {targets})")]
    LengthMismatch { preds: usize, targets: usize },
    #[error("targets are all zero")]
    ZeroTargets,
    #[error("power-law fit needs at least 3 points above the floor, got {0}")]
    TooFewPoints(usize),
    #[error("power-law data must be positive (N = {n}, loss = {loss})")]
    NonPositive { n: f64, loss: f64 },
    #[error("unknown method {0:?} (expected simplex, spline-<order>, relu-mlp, tanh-mlp or modular-mlp)")]
    UnknownMethod(String),
    #[error("method {method} does not support {dim}-dimensional targets")]
    Unsupported { method: String, dim: usize },
    #[error("sizes must be nonempty and ascending")]
    BadSizes,
    #[error("train and test sets share {0} points")]
    Overlap(usize),
    #[error("cell exceeded the {0:.0} s timeout")]
    Timeout(f64),
    #[error("malformed CSV: {0}")]
    Format(String),
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Target(#[from] TargetError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
