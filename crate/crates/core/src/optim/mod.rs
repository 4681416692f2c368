//! Optimizers for driving MSE toward the `f64` precision floor: Adam, BFGS
//! with a strong-Wolfe line search, low-curvature subspace descent, and
//! two-stage boosting.

mod adam;
mod bfgs;
mod boost;
mod eigen;
mod subspace;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::{adam_minimize, Adam, AdamConfig};
pub use bfgs::{bfgs, bfgs_minimize, BfgsConfig, BfgsResult, LineSearchRecord};
pub use boost::{boost_train, BoostConfig, BoostOutcome, StageOptimizer};
pub use eigen::{sym_eigendecompose, sym_eigendecompose_with, EigenMethod, EigenSystem};
pub use subspace::{low_curvature_minimize, project_low_curvature, SubspaceConfig};

use crate::net::{NetError, Trainable};
use crate::targets::Dataset;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("loss became non-finite at step {step}")]
    NonFiniteLoss { step: usize },
    #[error("gradient became non-finite at step {step}")]
    NonFiniteGradient { step: usize },
    #[error("matrix is not symmetric (max |H - Hᵀ| = {0:e})")]
    NotSymmetric(f64),
    #[error("matrix of order {n} exceeds the dense bound {max}")]
    TooLarge { n: usize, max: usize },
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error("dataset is empty")]
    EmptyData,
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Why an optimizer stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradTol,
    MaxIters,
    /// No step reduced the loss: the precision-loss regime.
    Stall,
    /// The projected gradient vanished.
    SubspaceConverged,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::GradTol => "grad_tol",
            StopReason::MaxIters => "max_iters",
            StopReason::Stall => "stall",
            StopReason::SubspaceConverged => "subspace_converged",
        }
    }
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One row of a loss history: `(step, mse, rmse_rel, phase)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub step: usize,
    pub mse: f64,
    pub rmse_rel: f64,
    pub phase: String,
}

/// A differentiable scalar function of a parameter vector.
pub trait Objective {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Value at `x`, with the gradient written to `grad`.
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

/// Full-batch MSE of a trainable model on a dataset.
pub struct DataObjective<'a, M: ?Sized> {
    pub model: &'a M,
    pub data: &'a Dataset,
}

impl<M: Trainable + ?Sized> Objective for DataObjective<'_, M> {
    fn dim(&self) -> usize {
        self.model.n_params()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.model.loss_at(x, self.data)
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.model.loss_grad_at(x, self.data, None, grad)
    }
}

/// An objective given by a closure returning the value and filling the gradient.
pub struct FnObjective<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64], Option<&mut [f64]>) -> f64> Objective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x, None)
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        (self.f)(x, Some(grad))
    }
}

/// Relative RMSE implied by an MSE on `data`: `sqrt(n·mse / Σy²)`.
pub fn mse_to_rmse_rel(mse: f64, data: &Dataset) -> f64 {
    let ss: f64 = data.targets.iter().map(|y| y * y).sum();
    (mse * data.len() as f64 / ss).sqrt()
}

pub(crate) fn history_row(step: usize, mse: f64, data: &Dataset, phase: &str) -> HistoryRow {
    HistoryRow { step, mse, rmse_rel: mse_to_rmse_rel(mse, data), phase: phase.to_string() }
}

pub(crate) fn check_data<M: Trainable + ?Sized>(model: &M, data: &Dataset) -> Result<(), OptimError> {
    if data.dim != model.input_dim() {
        return Err(NetError::DimensionMismatch { expected: model.input_dim(), got: data.dim }.into());
    }
    if data.is_empty() {
        return Err(OptimError::EmptyData);
    }
    Ok(())
}
