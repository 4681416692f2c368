use serde::{Deserialize, Serialize};

use super::bspline::{basis_funs, collocation, find_span, not_a_knot_knots};
use super::InterpError;
use crate::targets::{Domain, TargetSpec};

const DEGREE: usize = 3;

/// Tensor-product cubic interpolant on a regular grid in 2 or 3 dimensions.
///
/// Stored as tensor B-spline coefficients over not-a-knot knot vectors; each
/// grid cell carries a tensor cubic polynomial determined by its 4^d nearest
/// coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpline {
    dim: usize,
    axes: Vec<Vec<f64>>,
    knots: Vec<Vec<f64>>,
    /// Row-major over axes, last axis fastest.
    coefficients: Vec<f64>,
}

impl GridSpline {
    /// Interpolates `values` (row-major, last axis fastest) given on the grid `axes`.
    pub fn from_grid(axes: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self, InterpError> {
        let dim = axes.len();
        if !(2..=3).contains(&dim) {
            return Err(InterpError::UnsupportedDimension(dim));
        }
        for ax in &axes {
            if ax.len() < DEGREE + 1 {
                return Err(InterpError::TooFewPoints { need: DEGREE + 1, got: ax.len() });
            }
            if let Some(i) = ax.windows(2).position(|w| w[1] <= w[0]) {
                return Err(InterpError::NotIncreasing(i + 1));
            }
        }
        let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
        let total: usize = shape.iter().product();
        if values.len() != total {
            return Err(InterpError::DimensionMismatch { expected: total, got: values.len() });
        }
        let knots: Vec<Vec<f64>> = axes.iter().map(|ax| not_a_knot_knots(ax, DEGREE)).collect();
        let mut coef = values;
        let mut scratch = Vec::new();
        // one 1D solve per grid line, axis by axis
        for a in 0..dim {
            let lu = collocation(&axes[a], &knots[a], DEGREE)?;
            let stride: usize = shape[a + 1..].iter().product();
            let outer: usize = shape[..a].iter().product();
            for o in 0..outer {
                for inner in 0..stride {
                    let offset = o * shape[a] * stride + inner;
                    lu.solve_strided(&mut coef, offset, stride, &mut scratch);
                }
            }
        }
        Ok(GridSpline { dim, axes, knots, coefficients: coef })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn n_points(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, InterpError> {
        if x.len() != self.dim {
            return Err(InterpError::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        let mut basis = [[0.0; 8]; 3];
        let mut first = [0usize; 3];
        for a in 0..self.dim {
            let ax = &self.axes[a];
            let (lo, hi) = (ax[0], ax[ax.len() - 1]);
            if !(x[a] >= lo && x[a] <= hi) {
                return Err(InterpError::OutOfRange { x: x[a], lo, hi });
            }
            let mu = find_span(&self.knots[a], DEGREE, x[a]);
            basis_funs(&self.knots[a], DEGREE, mu, x[a], &mut basis[a]);
            first[a] = mu - DEGREE;
        }
        let shape: Vec<usize> = self.axes.iter().map(Vec::len).collect();
        let mut sum = 0.0;
        if self.dim == 2 {
            for i in 0..=DEGREE {
                let row = (first[0] + i) * shape[1];
                let mut s = 0.0;
                for j in 0..=DEGREE {
                    s += basis[1][j] * self.coefficients[row + first[1] + j];
                }
                sum += basis[0][i] * s;
            }
        } else {
            for i in 0..=DEGREE {
                let mut si = 0.0;
                for j in 0..=DEGREE {
                    let base = ((first[0] + i) * shape[1] + first[1] + j) * shape[2] + first[2];
                    let mut s = 0.0;
                    for k in 0..=DEGREE {
                        s += basis[2][k] * self.coefficients[base + k];
                    }
                    si += basis[1][j] * s;
                }
                sum += basis[0][i] * si;
            }
        }
        Ok(sum)
    }
}

/// Samples `spec` on a regular `pts_per_axis^d` grid over `domain` and interpolates it.
pub fn grid_spline_fit(spec: &TargetSpec, domain: &Domain, pts_per_axis: usize) -> Result<GridSpline, InterpError> {
    let d = spec.dim();
    if !(2..=3).contains(&d) {
        return Err(InterpError::UnsupportedDimension(d));
    }
    if pts_per_axis < DEGREE + 1 {
        return Err(InterpError::TooFewPoints { need: DEGREE + 1, got: pts_per_axis });
    }
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|a| {
            let (lo, w) = (domain.lo()[a], domain.width(a));
            (0..pts_per_axis)
                .map(|i| if i + 1 == pts_per_axis { domain.hi()[a] } else { lo + w * i as f64 / (pts_per_axis - 1) as f64 })
                .collect()
        })
        .collect();
    let mut values = Vec::with_capacity(pts_per_axis.pow(d as u32));
    let mut x = vec![0.0; d];
    let mut idx = vec![0usize; d];
    loop {
        for a in 0..d {
            x[a] = axes[a][idx[a]];
        }
        values.push(spec.eval(&x)?);
        let mut a = d;
        loop {
            if a == 0 {
                return GridSpline::from_grid(axes, values);
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] < pts_per_axis {
                break;
            }
            idx[a] = 0;
        }
    }
}
