use serde::{Deserialize, Serialize};

use super::{Activation, Mlp, NetError};

/// Scale and expansion point of the multiplication gadget.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GadgetConfig {
    pub a: f64,
    pub b: f64,
}

impl GadgetConfig {
    /// `tanh''(0) = 0`, so the gadget is expanded around `b = 1` instead of the origin.
    pub const DEFAULT_BIAS: f64 = 1.0;

    pub fn new(a: f64, b: f64) -> Result<Self, NetError> {
        let cfg = GadgetConfig { a, b };
        cfg.validate(Activation::Tanh)?;
        Ok(cfg)
    }

    pub fn with_scale(a: f64) -> Result<Self, NetError> {
        Self::new(a, Self::DEFAULT_BIAS)
    }

    fn validate(&self, act: Activation) -> Result<f64, NetError> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(NetError::GadgetScale(self.a));
        }
        let curv = act.second_derivative(self.b);
        if !(curv.abs() > 1e-3) {
            return Err(NetError::GadgetCurvature(curv));
        }
        Ok(curv)
    }
}

/// Hidden rows and output weights of one gadget acting on inputs `i` and `j`.
///
/// Units compute `σ(b + a(x+y))`, `σ(b − a(x+y))`, `σ(b + a(x−y))`, `σ(b − a(x−y))`;
/// with output weights `±1/(4a²σ''(b))` the sum is `xy + O(a²)`. Swapping
/// `x` and `y` swaps the last two units, which the output sum treats
/// symmetrically, so the gadget is bit-exactly symmetric.
fn gadget_rows(cfg: &GadgetConfig, curv: f64, dim: usize, i: usize, j: usize) -> ([Vec<f64>; 4], f64) {
    let a = cfg.a;
    let signs = [(1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)];
    let rows = signs.map(|(si, sj)| {
        let mut r = vec![0.0; dim];
        r[i] = si * a;
        r[j] = sj * a;
        r
    });
    (rows, 1.0 / (4.0 * a * a * curv))
}

/// A `[2, 4, 1]` tanh network approximating `x·y` with error `O(a²)`.
pub fn multiplication_gadget(cfg: GadgetConfig) -> Result<Mlp, NetError> {
    pairwise_product_network(2, &[(0, 1)], cfg)
}

/// A `[dim, 4·pairs, 1]` tanh network approximating `Σ x_i·x_j` over `pairs`,
/// one multiplication gadget per pair.
pub fn pairwise_product_network(dim: usize, pairs: &[(usize, usize)], cfg: GadgetConfig) -> Result<Mlp, NetError> {
    let curv = cfg.validate(Activation::Tanh)?;
    if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= dim || j >= dim) {
        return Err(NetError::DimensionMismatch { expected: dim, got: i.max(j) + 1 });
    }
    let width = 4 * pairs.len();
    let mut params = Vec::with_capacity(width * dim + 2 * width + 1);
    let mut out = Vec::with_capacity(width);
    for &(i, j) in pairs {
        let (rows, w) = gadget_rows(&cfg, curv, dim, i, j);
        for r in rows {
            params.extend(r);
        }
        out.extend([w, w, -w, -w]);
    }
    params.extend(std::iter::repeat(cfg.b).take(width));
    params.extend(out);
    params.push(0.0);
    Mlp::new(vec![dim, width, 1], Activation::Tanh, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_grid_error(net: &Mlp) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..=100 {
            for j in 0..=100 {
                let (x, y) = (-1.0 + 0.02 * i as f64, -1.0 + 0.02 * j as f64);
                worst = worst.max((net.forward(&[x, y]).unwrap() - x * y).abs());
            }
        }
        worst
    }

    #[test]
    fn zero_input_gives_near_zero() {
        for a in [1e-1, 1e-2, 1e-3] {
            let g = multiplication_gadget(GadgetConfig::with_scale(a).unwrap()).unwrap();
            for k in 0..=20 {
                let y = -1.0 + 0.1 * k as f64;
                assert!(g.forward(&[0.0, y]).unwrap().abs() <= 10.0 * a * a);
            }
        }
    }

    #[test]
    fn bit_symmetric() {
        let g = multiplication_gadget(GadgetConfig::with_scale(0.037).unwrap()).unwrap();
        for i in 0..40 {
            for j in 0..40 {
                let (x, y) = ((i as f64 * 0.7919).sin(), (j as f64 * 1.313).cos() * 0.9);
                assert_eq!(g.forward(&[x, y]).unwrap().to_bits(), g.forward(&[y, x]).unwrap().to_bits());
            }
        }
    }

    #[test]
    fn halving_a_quarters_the_error() {
        let e1 = max_grid_error(&multiplication_gadget(GadgetConfig::with_scale(1e-2).unwrap()).unwrap());
        let e2 = max_grid_error(&multiplication_gadget(GadgetConfig::with_scale(5e-3).unwrap()).unwrap());
        assert!((e1 / e2 - 4.0).abs() <= 0.4, "{e1} / {e2}");
    }

    #[test]
    fn rejects_flat_bias_and_bad_scale() {
        assert!(matches!(GadgetConfig::new(0.1, 0.0), Err(NetError::GadgetCurvature(_))));
        assert!(matches!(GadgetConfig::new(0.0, 1.0), Err(NetError::GadgetScale(_))));
        assert!(matches!(GadgetConfig::new(f64::NAN, 1.0), Err(NetError::GadgetScale(_))));
    }

    #[test]
    fn shape_and_param_count() {
        let g = multiplication_gadget(GadgetConfig::with_scale(0.1).unwrap()).unwrap();
        assert_eq!(g.layer_dims(), &[2, 4, 1]);
        let d = pairwise_product_network(6, &[(0, 3), (1, 4), (2, 5)], GadgetConfig::with_scale(0.1).unwrap()).unwrap();
        assert_eq!(d.layer_dims(), &[6, 12, 1]);
        assert_eq!(d.n_params(), 97);
    }
}
