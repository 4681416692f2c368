use serde::{Deserialize, Serialize};

use super::{check_data, history_row, DataObjective, HistoryRow, Objective, OptimError, StopReason};
use crate::linalg::{dot, norm};
use crate::net::Trainable;
use crate::targets::Dataset;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BfgsConfig {
    pub max_iters: usize,
    /// Stop once the largest gradient component is at most this.
    pub grad_tol: f64,
    pub c1: f64,
    pub c2: f64,
    /// Function evaluations allowed per line search before it is declared failed.
    pub max_ls_evals: usize,
}

impl Default for BfgsConfig {
    fn default() -> Self {
        BfgsConfig { max_iters: 10_000, grad_tol: 1e-12, c1: 1e-4, c2: 0.9, max_ls_evals: 60 }
    }
}

impl BfgsConfig {
    pub fn validate(&self) -> Result<(), OptimError> {
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(OptimError::InvalidConfig(format!("need 0 < c1 < c2 < 1, got c1={} c2={}", self.c1, self.c2)));
        }
        if self.max_ls_evals < 2 {
            return Err(OptimError::InvalidConfig("line search needs at least two evaluations".into()));
        }
        Ok(())
    }
}

/// An accepted line-search point along direction `d` from `x`:
/// `φ(t) = f(x + t·d)` with slopes `φ'(0)` and `φ'(t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSearchRecord {
    pub t: f64,
    pub f0: f64,
    pub f: f64,
    pub slope0: f64,
    pub slope: f64,
    /// False for a fallback step that only reduced the loss.
    pub wolfe: bool,
}

#[derive(Clone, Debug)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    /// Loss before the first iteration and after every accepted step.
    pub history: Vec<f64>,
    pub stop: StopReason,
    pub iterations: usize,
    pub records: Vec<LineSearchRecord>,
    /// Times the inverse-Hessian estimate was reset to the identity.
    pub resets: usize,
}

struct Probe<'a, O: Objective + ?Sized> {
    obj: &'a O,
    x: &'a [f64],
    d: &'a [f64],
    trial: Vec<f64>,
    grad: Vec<f64>,
    evals: usize,
    /// Lowest `(φ(t), t)` seen so far.
    best: (f64, f64),
}

impl<O: Objective + ?Sized> Probe<'_, O> {
    /// `(φ(t), φ'(t))`, leaving the trial point and its gradient in the buffers.
    fn eval(&mut self, t: f64) -> (f64, f64) {
        self.evals += 1;
        for i in 0..self.x.len() {
            self.trial[i] = self.x[i] + t * self.d[i];
        }
        let f = self.obj.value_grad(&self.trial, &mut self.grad);
        if f < self.best.0 {
            self.best = (f, t);
        }
        (f, dot(&self.grad, self.d))
    }

    /// After a failed search: the lowest point seen, if it is below `f0`.
    fn fallback(&mut self, f0: f64) -> Option<(f64, f64, f64, bool)> {
        let (fb, tb) = self.best;
        if !(fb < f0) {
            return None;
        }
        let (f, s) = self.eval(tb);
        Some((tb, f, s, false))
    }
}

/// Minimizer of the cubic matching values and slopes at `a` and `b`,
/// or `None` if it is not well defined.
fn cubic_min(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> Option<f64> {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
    t.is_finite().then_some(t)
}

/// Strong-Wolfe line search (bracketing, then zoom with safeguarded cubic
/// interpolation). Returns `(t, φ(t), φ'(t), wolfe)` with the trial point's
/// gradient left in `probe.grad`. If the evaluation budget runs out, falls back
/// to the lowest point seen when that is strictly below `f0`.
fn strong_wolfe<O: Objective + ?Sized>(probe: &mut Probe<'_, O>, f0: f64, slope0: f64, t_init: f64, cfg: &BfgsConfig) -> Option<(f64, f64, f64, bool)> {
    let armijo = |t: f64, f: f64| f <= f0 + cfg.c1 * t * slope0;
    let curvature = |s: f64| s.abs() <= -cfg.c2 * slope0;
    let (mut t_prev, mut f_prev, mut s_prev) = (0.0, f0, slope0);
    let mut t = t_init;
    let mut first = true;
    let (mut lo, mut hi);
    loop {
        if probe.evals >= cfg.max_ls_evals {
            return probe.fallback(f0);
        }
        let (f, s) = probe.eval(t);
        if !f.is_finite() {
            // overshoot into overflow: treat as a failed Armijo test
            lo = (t_prev, f_prev, s_prev);
            hi = (t, f64::INFINITY, f64::NAN);
            break;
        }
        if !armijo(t, f) || (!first && f >= f_prev) {
            lo = (t_prev, f_prev, s_prev);
            hi = (t, f, s);
            break;
        }
        if curvature(s) {
            return Some((t, f, s, true));
        }
        if s >= 0.0 {
            lo = (t, f, s);
            hi = (t_prev, f_prev, s_prev);
            break;
        }
        t_prev = t;
        f_prev = f;
        s_prev = s;
        t *= 2.0;
        first = false;
    }
    // zoom: `lo` satisfies Armijo with the lowest value seen, and the
    // interval between `lo` and `hi` contains a strong-Wolfe point
    loop {
        if probe.evals >= cfg.max_ls_evals {
            return probe.fallback(f0);
        }
        let (a, b) = (lo.0, hi.0);
        let width = (b - a).abs();
        if width <= f64::EPSILON * a.abs().max(b.abs()) {
            return probe.fallback(f0);
        }
        let (left, right) = (a.min(b), a.max(b));
        let margin = 0.1 * width;
        let t = match (hi.1.is_finite() && hi.2.is_finite()).then(|| cubic_min(a, lo.1, lo.2, b, hi.1, hi.2)).flatten() {
            Some(t) if t > left + margin && t < right - margin => t,
            _ => 0.5 * (a + b),
        };
        let (f, s) = probe.eval(t);
        if !f.is_finite() || !armijo(t, f) || f >= lo.1 {
            hi = (t, f, s);
        } else {
            if curvature(s) {
                return Some((t, f, s, true));
            }
            if s * (hi.0 - lo.0) >= 0.0 {
                hi = lo;
            }
            lo = (t, f, s);
        }
    }
}

/// Dense BFGS on the inverse Hessian with a strong-Wolfe line search.
///
/// The identity starting estimate is rescaled by `sᵀy/yᵀy` at the first
/// update. A line search that cannot satisfy strong Wolfe within its budget
/// still takes its lowest point if that reduces the loss. When no point reduces
/// the loss, the estimate is reset to a scaled identity and the search retried
/// along `-g` from a unit step; a second failure stops with [`StopReason::Stall`].
pub fn bfgs<O: Objective + ?Sized>(obj: &O, x0: &[f64], cfg: &BfgsConfig) -> Result<BfgsResult, OptimError> {
    cfg.validate()?;
    let n = obj.dim();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut f = obj.value_grad(&x, &mut g);
    if !f.is_finite() {
        return Err(OptimError::NonFiniteLoss { step: 0 });
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(OptimError::NonFiniteGradient { step: 0 });
    }
    let mut h = identity(n);
    let mut at_identity = true;
    let mut history = vec![f];
    let mut records = Vec::new();
    let mut resets = 0;
    let mut f_old = f + 0.5 * norm(&g);
    let mut d = vec![0.0; n];
    // `hg = H·g` is kept current so each iteration reads `H` only twice:
    // once for `H·y` and `H·g_new` together, once for the rank-2 update
    let mut hg = g.clone();
    // `sᵀy / yᵀy` from the latest curvature pair: the scale of a fresh `H`
    let mut gamma = 1.0;
    let mut retry = false;
    let (mut s, mut y, mut hy, mut hgn) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut iter = 0;
    let stop = loop {
        if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= cfg.grad_tol {
            break StopReason::GradTol;
        }
        if iter >= cfg.max_iters {
            break StopReason::MaxIters;
        }
        let found = loop {
            for (di, hgi) in d.iter_mut().zip(&hg) {
                *di = -hgi;
            }
            let slope0 = dot(&g, &d);
            if !(slope0 < 0.0) {
                if at_identity {
                    break None;
                }
                reset(&mut h, gamma, &mut at_identity, &mut resets);
                hg.iter_mut().zip(&g).for_each(|(a, b)| *a = gamma * b);
                retry = true;
                continue;
            }
            let t_init = if retry {
                1.0
            } else {
                let t = 1.01 * 2.0 * (f - f_old) / slope0;
                if t > 0.0 && t.is_finite() { t.min(1.0) } else { 1.0 }
            };
            let mut probe = Probe { obj, x: &x, d: &d, trial: vec![0.0; n], grad: vec![0.0; n], evals: 0, best: (f, 0.0) };
            match strong_wolfe(&mut probe, f, slope0, t_init, cfg) {
                Some((t, f_new, slope, wolfe)) => {
                    records.push(LineSearchRecord { t, f0: f, f: f_new, slope0, slope, wolfe });
                    break Some((t, f_new, probe.trial, probe.grad));
                }
                None if at_identity => break None,
                None => {
                    reset(&mut h, gamma, &mut at_identity, &mut resets);
                    hg.iter_mut().zip(&g).for_each(|(a, b)| *a = gamma * b);
                    retry = true;
                }
            }
        };
        let Some((_t, f_new, x_new, g_new)) = found else {
            break StopReason::Stall;
        };
        retry = false;
        iter += 1;
        if g_new.iter().any(|v| !v.is_finite()) {
            return Err(OptimError::NonFiniteGradient { step: iter });
        }
        for i in 0..n {
            s[i] = x_new[i] - x[i];
            y[i] = g_new[i] - g[i];
        }
        for i in 0..n {
            let row = &h[i * n..(i + 1) * n];
            hy[i] = dot(row, &y);
            hgn[i] = dot(row, &g_new);
        }
        let sy = dot(&s, &y);
        if sy > 1e-14 * norm(&s) * norm(&y) {
            gamma = sy / dot(&y, &y);
            if at_identity {
                // first pair since a reset: rescale the identity before updating
                let g0 = h[0];
                for i in 0..n {
                    h[i * n + i] = gamma;
                }
                let k = gamma / g0;
                hy.iter_mut().for_each(|v| *v *= k);
                hgn.iter_mut().for_each(|v| *v *= k);
            }
            // H ← (I − ρsyᵀ) H (I − ρysᵀ) + ρssᵀ
            let rho = 1.0 / sy;
            let coef = rho * rho * dot(&y, &hy) + rho;
            for i in 0..n {
                let row = &mut h[i * n..(i + 1) * n];
                let (a, b) = (coef * s[i] - rho * hy[i], -rho * s[i]);
                for j in 0..n {
                    row[j] += a * s[j] + b * hy[j];
                }
            }
            let (sg, hyg) = (dot(&s, &g_new), dot(&hy, &g_new));
            for i in 0..n {
                hg[i] = hgn[i] + coef * s[i] * sg - rho * (hy[i] * sg + s[i] * hyg);
            }
            at_identity = false;
        } else {
            hg.copy_from_slice(&hgn);
        }
        f_old = f;
        f = f_new;
        x = x_new;
        g = g_new;
        history.push(f);
    };
    Ok(BfgsResult { x, f, history, stop, iterations: iter, records, resets })
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

fn reset(h: &mut [f64], scale: f64, at_identity: &mut bool, resets: &mut usize) {
    let n = (h.len() as f64).sqrt() as usize;
    h.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..n {
        h[i * n + i] = scale;
    }
    *at_identity = true;
    *resets += 1;
}

/// Full-batch BFGS on a model's MSE; the history has one row per iteration.
pub fn bfgs_minimize<M: Trainable + Clone>(net: &M, data: &Dataset, cfg: &BfgsConfig) -> Result<(M, Vec<HistoryRow>, StopReason), OptimError> {
    check_data(net, data)?;
    let obj = DataObjective { model: net, data };
    let res = bfgs(&obj, net.params(), cfg)?;
    let history = res.history.iter().enumerate().map(|(k, &l)| history_row(k, l, data, "bfgs")).collect();
    let mut out = net.clone();
    out.set_params(&res.x);
    Ok((out, history, res.stop))
}
