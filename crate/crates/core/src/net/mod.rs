//! Multilayer perceptrons with exact gradients, finite-difference Hessians,
//! the four-unit multiplication gadget, modular (graph-shaped) networks and
//! boosted assembly.

mod gadget;
mod mlp;
mod modular;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use gadget::{multiplication_gadget, pairwise_product_network, GadgetConfig};
pub use mlp::{assemble_boosted, boosted_param_count, forward, grad, hessian, mlp_init, relu_depth_bound, Mlp, Workspace, MAX_HESSIAN_PARAMS};
pub use modular::{modular_net_build, ModularNet};

pub(crate) use mlp::fd_hessian;

use crate::targets::Dataset;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("invalid layer dimensions {0:?} (need at least two positive entries ending in 1)")]
    InvalidDims(Vec<usize>),
    #[error("expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dataset is empty")]
    EmptyData,
    #[error("{n} parameters exceed the dense Hessian bound of {max}")]
    TooManyParams { n: usize, max: usize },
    #[error("activation curvature {0} at the gadget bias is too small")]
    GadgetCurvature(f64),
    #[error("gadget scale a = {0} must be positive and finite")]
    GadgetScale(f64),
    #[error("the multiplication gadget needs a smooth activation")]
    NeedsSmoothActivation,
    #[error("networks use different activations")]
    ActivationMismatch,
    #[error("network shapes are incompatible: {0}")]
    ShapeMismatch(String),
    #[error("node {node} has arity {arity} but its subnet takes {width} inputs")]
    ArityMismatch { node: usize, arity: usize, width: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// `(σ(z), σ'(z))`; the ReLU slope at 0 is taken as 0.
    #[inline]
    pub fn value_and_slope(self, z: f64) -> (f64, f64) {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    (z, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                (t, 1.0 - t * t)
            }
        }
    }

    /// `σ''(z)`; zero everywhere for ReLU.
    pub fn second_derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => 0.0,
            Activation::Tanh => {
                let t = z.tanh();
                -2.0 * t * (1.0 - t * t)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(format!("unknown activation `{other}` (expected relu or tanh)")),
        }
    }
}

/// A model with a flat parameter vector and a mean-squared-error objective.
///
/// The `*_at` methods evaluate at an arbitrary parameter vector of the right
/// length so optimizers can probe without cloning the model.
pub trait Trainable {
    fn input_dim(&self) -> usize;

    fn n_params(&self) -> usize;

    fn params(&self) -> &[f64];

    fn set_params(&mut self, theta: &[f64]);

    /// MSE over `rows` (all rows when `None`); its gradient is written to `grad`.
    fn loss_grad_at(&self, theta: &[f64], data: &Dataset, rows: Option<&[usize]>, grad: &mut [f64]) -> f64;

    /// MSE over all of `data`.
    fn loss_at(&self, theta: &[f64], data: &Dataset) -> f64;

    /// Row-major Hessian of the MSE at `theta`. Defaults to central
    /// differences of [`Trainable::loss_grad_at`].
    fn hessian_at(&self, theta: &[f64], data: &Dataset) -> Vec<f64> {
        fd_hessian(self, theta, data)
    }
}
