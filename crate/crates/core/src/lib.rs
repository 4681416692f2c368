//! High-precision function approximation.
//!
//! Symbolic targets are sampled into datasets and fit with Delaunay simplex
//! interpolation, polynomial splines, or small MLPs. The MLPs can then be
//! pushed toward the `f64` noise floor with BFGS, low-curvature subspace
//! descent, and two-stage boosting. The [`bench`] module measures relative
//! RMSE, fits scaling exponents, and reports Hessian spectra.

pub mod bench;
pub mod interp;
pub mod linalg;
pub mod net;
pub mod optim;
pub mod targets;

pub use targets::{Dataset, Domain, NormStats, TargetSpec};

/// Machine epsilon for `f64` (2^-52).
pub const EPS0: f64 = f64::EPSILON;
