use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_data, history_row, HistoryRow, OptimError};
use crate::net::Trainable;
use crate::targets::Dataset;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub steps: usize,
    /// Minibatch size; `None` means `min(|D|, 10^4)`.
    pub batch_size: Option<usize>,
    /// Full-data loss is recorded every this many steps.
    pub log_every: usize,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, steps: 20_000, batch_size: None, log_every: 100 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<(), OptimError> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(OptimError::InvalidConfig(format!("lr must be positive, got {}", self.lr)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(OptimError::InvalidConfig(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if self.batch_size == Some(0) || self.log_every == 0 {
            return Err(OptimError::InvalidConfig("batch size and logging interval must be positive".into()));
        }
        Ok(())
    }
}

/// Adam state with bias-corrected moment estimates.
#[derive(Clone, Debug)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, cfg: AdamConfig) -> Self {
        Adam { cfg, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c = &self.cfg;
        let bc1 = 1.0 - c.beta1.powi(self.t);
        let bc2 = 1.0 - c.beta2.powi(self.t);
        for i in 0..theta.len() {
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * grad[i];
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            theta[i] -= c.lr * mh / (vh.sqrt() + c.eps);
        }
    }
}

/// Minibatch Adam on MSE. Batches come from a seeded reshuffle each epoch;
/// the history holds the full-data MSE every `log_every` steps and at the end.
pub fn adam_minimize<M: Trainable + Clone>(net: &M, data: &Dataset, cfg: &AdamConfig, seed: u64) -> Result<(M, Vec<HistoryRow>), OptimError> {
    cfg.validate()?;
    check_data(net, data)?;
    let n = data.len();
    let batch = cfg.batch_size.unwrap_or(10_000).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut cursor = n;
    let mut theta = net.params().to_vec();
    let mut grad = vec![0.0; theta.len()];
    let mut opt = Adam::new(theta.len(), cfg.clone());
    let mut history = Vec::new();
    for step in 0..cfg.steps {
        if step % cfg.log_every == 0 {
            let l = net.loss_at(&theta, data);
            if !l.is_finite() {
                return Err(OptimError::NonFiniteLoss { step });
            }
            history.push(history_row(step, l, data, "adam"));
        }
        if cursor + batch > n {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let rows = &order[cursor..cursor + batch];
        cursor += batch;
        let l = net.loss_grad_at(&theta, data, Some(rows), &mut grad);
        if !l.is_finite() {
            return Err(OptimError::NonFiniteLoss { step });
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(OptimError::NonFiniteGradient { step });
        }
        opt.step(&mut theta, &grad);
    }
    let l = net.loss_at(&theta, data);
    if !l.is_finite() {
        return Err(OptimError::NonFiniteLoss { step: cfg.steps });
    }
    history.push(history_row(cfg.steps, l, data, "adam"));
    let mut out = net.clone();
    out.set_params(&theta);
    Ok((out, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_against_the_gradient_sign() {
        for g in [3.7, -0.002, 150.0] {
            let mut opt = Adam::new(1, AdamConfig::default());
            let mut th = [0.5];
            opt.step(&mut th, &[g]);
            // m̂/√v̂ = g/(|g| + ε)
            assert!((th[0] - (0.5 - 1e-3 * g / (g.abs() + 1e-8))).abs() <= 1e-15);
        }
    }

    #[test]
    fn converges_on_a_quadratic() {
        let mut opt = Adam::new(1, AdamConfig { lr: 1e-2, ..AdamConfig::default() });
        let mut th = [0.0];
        for _ in 0..5000 {
            let g = 2.0 * (th[0] - 3.0);
            opt.step(&mut th, &[g]);
        }
        assert!((th[0] - 3.0).abs() <= 1e-3, "{}", th[0]);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(AdamConfig { lr: 0.0, ..AdamConfig::default() }.validate().is_err());
        assert!(AdamConfig { beta2: 1.0, ..AdamConfig::default() }.validate().is_err());
        assert!(AdamConfig { batch_size: Some(0), ..AdamConfig::default() }.validate().is_err());
    }
}
