//! Interpolation baselines: Delaunay simplex interpolation and polynomial splines.

mod bspline;
mod delaunay;
mod grid;
mod spline;

use thiserror::Error;

pub use delaunay::{delaunay_triangulate, simplex_predict, PointLocator, Triangulation};
pub use grid::{grid_spline_fit, GridSpline};
pub use spline::{spline_eval_1d, spline_fit_1d, Spline1D};

use crate::targets::{Domain, TargetError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpError {
    #[error("dimension {0} is not supported")]
    UnsupportedDimension(usize),
    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("input points are affinely dependent")]
    Degenerate,
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("point lies outside the convex hull")]
    OutsideHull,
    #[error("point location failed at simplex {simplex}")]
    WalkFailure { simplex: usize },
    #[error("spline order {0} is not in 1..=5")]
    InvalidOrder(usize),
    #[error("abscissae must be strictly increasing (violated at index {0})")]
    NotIncreasing(usize),
    #[error("x = {x} lies outside [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },
    #[error("collocation system is singular")]
    Singular,
    #[error(transparent)]
    Target(#[from] TargetError),
}

/// True for points at least `margin_fraction` of the domain width away from
/// both bounds on every axis.
pub fn interior_mask(domain: &Domain, margin_fraction: f64, points: &[f64]) -> Vec<bool> {
    let d = domain.dim();
    assert!((0.0..0.5).contains(&margin_fraction), "margin fraction must lie in [0, 0.5)");
    points
        .chunks_exact(d)
        .map(|p| {
            (0..d).all(|j| {
                let m = margin_fraction * domain.width(j);
                p[j] >= domain.lo()[j] + m && p[j] <= domain.hi()[j] - m
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mask_examples() {
        let dom = Domain::cube(1, 0.0, 1.0).unwrap();
        assert_eq!(interior_mask(&dom, 0.1, &[0.5, 0.05, 0.1, 0.95]), vec![true, false, true, false]);
    }

    #[test]
    fn mask_fraction_in_square() {
        let dom = Domain::cube(2, 0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<f64> = (0..200_000).map(|_| rng.gen()).collect();
        let frac = interior_mask(&dom, 0.1, &pts).iter().filter(|&&b| b).count() as f64 / 100_000.0;
        assert!((frac - 0.64).abs() < 0.01, "{frac}");
    }
}
