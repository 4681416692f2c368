use serde::{Deserialize, Serialize};

use super::bspline::{basis_ders, collocation, find_span, not_a_knot_knots};
use super::InterpError;

/// Interpolating spline of polynomial degree 1..=5 stored in piecewise power form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spline1D {
    order: usize,
    /// Strictly increasing breakpoints.
    knots: Vec<f64>,
    /// `coefficients[j][m]` multiplies `(x - knots[j])^m` on interval `j`.
    coefficients: Vec<Vec<f64>>,
}

impl Spline1D {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn coefficients(&self) -> &[Vec<f64>] {
        &self.coefficients
    }

    /// Interval index: left-closed, with the last interval also right-closed.
    fn interval(&self, x: f64) -> Result<usize, InterpError> {
        let (lo, hi) = (self.knots[0], self.knots[self.knots.len() - 1]);
        if !(x >= lo && x <= hi) {
            return Err(InterpError::OutOfRange { x, lo, hi });
        }
        let j = self.knots.partition_point(|&k| k <= x);
        Ok(j.clamp(1, self.knots.len() - 1) - 1)
    }

    pub fn eval(&self, x: f64) -> Result<f64, InterpError> {
        let j = self.interval(x)?;
        let u = x - self.knots[j];
        Ok(self.coefficients[j].iter().rev().fold(0.0, |acc, c| acc * u + c))
    }

    /// `m`-th derivative of the polynomial piece on interval `j`, evaluated at offset `u`.
    pub fn piece_derivative(&self, j: usize, m: usize, u: f64) -> f64 {
        let c = &self.coefficients[j];
        let mut acc = 0.0;
        for p in (m..c.len()).rev() {
            let falling: f64 = (p - m + 1..=p).map(|v| v as f64).product();
            acc = acc * u + c[p] * falling;
        }
        acc
    }

    pub fn n_params(&self) -> usize {
        self.coefficients.len() * (self.order + 1)
    }
}

/// Fits the not-a-knot interpolating spline of degree `order` through `(xs, ys)`.
pub fn spline_fit_1d(xs: &[f64], ys: &[f64], order: usize) -> Result<Spline1D, InterpError> {
    if !(1..=5).contains(&order) {
        return Err(InterpError::InvalidOrder(order));
    }
    if xs.len() != ys.len() {
        return Err(InterpError::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    if xs.len() < order + 1 {
        return Err(InterpError::TooFewPoints { need: order + 1, got: xs.len() });
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(InterpError::NonFinite);
    }
    if let Some(i) = xs.windows(2).position(|w| w[1] <= w[0]) {
        return Err(InterpError::NotIncreasing(i + 1));
    }
    let k = order;
    let t = not_a_knot_knots(xs, k);
    let lu = collocation(xs, &t, k)?;
    let mut coef = ys.to_vec();
    lu.solve(&mut coef);

    let mut breaks: Vec<f64> = t[k..t.len() - k].to_vec();
    breaks.dedup();
    let mut pieces = Vec::with_capacity(breaks.len() - 1);
    for &b in &breaks[..breaks.len() - 1] {
        let mu = find_span(&t, k, b);
        let ders = basis_ders(&t, k, mu, b);
        let mut fact = 1.0;
        let mut piece = Vec::with_capacity(k + 1);
        for (m, dm) in ders.iter().enumerate() {
            if m > 0 {
                fact *= m as f64;
            }
            let v: f64 = dm.iter().enumerate().map(|(r, d)| d * coef[mu - k + r]).sum();
            piece.push(v / fact);
        }
        pieces.push(piece);
    }
    Ok(Spline1D { order, knots: breaks, coefficients: pieces })
}

pub fn spline_eval_1d(sp: &Spline1D, x: f64) -> Result<f64, InterpError> {
    sp.eval(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn cubic_reproduces_cubic() {
        let f = |x: f64| 0.5 - 2.0 * x + 0.3 * x * x - 0.7 * x * x * x;
        let xs = linspace(-1.0, 2.0, 10);
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let sp = spline_fit_1d(&xs, &ys, 3).unwrap();
        for x in linspace(-1.0, 2.0, 301) {
            let (got, want) = (sp.eval(x).unwrap(), f(x));
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{x}: {got} vs {want}");
        }
    }

    #[test]
    fn every_order_reproduces_its_degree() {
        for order in 1..=5 {
            let f = |x: f64| (0..=order).map(|p| (1.0 + p as f64) * 0.3f64.powi(p as i32) * x.powi(p as i32)).sum::<f64>();
            let xs: Vec<f64> = (0..17).map(|i| (i as f64 * 0.37).sin() * 0.1 + i as f64 * 0.25).collect();
            let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
            let sp = spline_fit_1d(&xs, &ys, order).unwrap();
            for x in linspace(xs[0], xs[16], 200) {
                let (got, want) = (sp.eval(x).unwrap(), f(x));
                assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "order {order} at {x}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn interpolates_at_sites() {
        let xs = linspace(1.0, 5.0, 40);
        let ys: Vec<f64> = xs.iter().map(|x| (2.0 * x).cos()).collect();
        for order in 1..=5 {
            let sp = spline_fit_1d(&xs, &ys, order).unwrap();
            for (x, y) in xs.iter().zip(&ys) {
                assert!((sp.eval(*x).unwrap() - y).abs() <= 1e-12 * y.abs().max(1.0));
            }
        }
    }

    #[test]
    fn linear_midpoint_is_mean() {
        let xs = [0.0, 1.0, 3.0];
        let ys = [2.0, -1.0, 5.0];
        let sp = spline_fit_1d(&xs, &ys, 1).unwrap();
        assert_eq!(sp.eval(0.5).unwrap(), 0.5);
        assert_eq!(sp.eval(2.0).unwrap(), 2.0);
    }

    #[test]
    fn continuity_at_interior_knots() {
        let xs = linspace(1.0, 5.0, 25);
        let ys: Vec<f64> = xs.iter().map(|x| (2.0 * x).cos() + 0.1 * x * x).collect();
        for order in 2..=5 {
            let sp = spline_fit_1d(&xs, &ys, order).unwrap();
            for j in 1..sp.knots().len() - 1 {
                let h = sp.knots()[j] - sp.knots()[j - 1];
                for m in 0..order {
                    let left = sp.piece_derivative(j - 1, m, h);
                    let right = sp.piece_derivative(j, m, 0.0);
                    let scale = left.abs().max(right.abs()).max(1.0);
                    assert!((left - right).abs() <= 1e-9 * scale, "order {order} knot {j} deriv {m}: {left} vs {right}");
                }
            }
        }
    }

    #[test]
    fn cubic_first_derivative_matches_finite_differences_across_knots() {
        let xs = linspace(1.0, 5.0, 30);
        let ys: Vec<f64> = xs.iter().map(|x| (2.0 * x).cos()).collect();
        let sp = spline_fit_1d(&xs, &ys, 3).unwrap();
        let h = 1e-6;
        for &k in &sp.knots()[1..sp.knots().len() - 1] {
            let left = (sp.eval(k).unwrap() - sp.eval(k - h).unwrap()) / h;
            let right = (sp.eval(k + h).unwrap() - sp.eval(k).unwrap()) / h;
            assert!((left - right).abs() < 1e-5, "{k}: {left} vs {right}");
        }
    }

    #[test]
    fn errors() {
        assert_eq!(spline_fit_1d(&[0.0, 1.0], &[0.0, 1.0], 3), Err(InterpError::TooFewPoints { need: 4, got: 2 }));
        assert_eq!(spline_fit_1d(&[0.0, 1.0, 1.0, 2.0], &[0.0; 4], 2), Err(InterpError::NotIncreasing(2)));
        assert_eq!(spline_fit_1d(&[0.0, 1.0], &[0.0, 1.0], 6), Err(InterpError::InvalidOrder(6)));
        let sp = spline_fit_1d(&[0.0, 1.0], &[0.0, 1.0], 1).unwrap();
        assert!(matches!(sp.eval(1.5), Err(InterpError::OutOfRange { .. })));
        assert_eq!(sp.eval(1.0).unwrap(), 1.0);
    }

    proptest! {
        #[test]
        fn cubic_reproduces_random_cubics(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, d in -2.0f64..2.0, n in 4usize..30) {
            let xs = linspace(-1.0, 1.0, n);
            let f = |x: f64| a + x * (b + x * (c + x * d));
            let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
            let sp = spline_fit_1d(&xs, &ys, 3).unwrap();
            for x in linspace(-1.0, 1.0, 37) {
                prop_assert!((sp.eval(x).unwrap() - f(x)).abs() <= 1e-12 * f(x).abs().max(1.0));
            }
        }
    }
}
