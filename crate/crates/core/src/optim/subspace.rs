use serde::{Deserialize, Serialize};

use super::{check_data, history_row, sym_eigendecompose, EigenSystem, HistoryRow, OptimError, StopReason};
use crate::linalg::{axpy, dot, norm};
use crate::net::{Trainable, MAX_HESSIAN_PARAMS};
use crate::targets::Dataset;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubspaceConfig {
    /// Eigen-directions with `λ < tau` make up the search subspace.
    pub tau: f64,
    pub max_steps: usize,
    /// Loss evaluations per line search (bracketing plus golden section).
    pub ls_max_evals: usize,
}

impl Default for SubspaceConfig {
    fn default() -> Self {
        SubspaceConfig { tau: 1e-16, max_steps: 5, ls_max_evals: 60 }
    }
}

/// `ĝ = Σ_{λ_i < τ} e_i (e_i · g)`.
pub fn project_low_curvature(eig: &EigenSystem, g: &[f64], tau: f64) -> Vec<f64> {
    let mut out = vec![0.0; g.len()];
    for (i, &lam) in eig.values().iter().enumerate() {
        if lam >= tau {
            break;
        }
        let e = eig.vector(i);
        axpy(dot(e, g), e, &mut out);
    }
    out
}

/// Derivative-free minimization of `phi` over `t ≥ 0`: bracket by scaling
/// `t0`, then golden-section search. Returns the best `(t, φ(t))` if it beats `phi0`.
fn golden_line_search(phi: &mut dyn FnMut(f64) -> f64, phi0: f64, t0: f64, budget: usize) -> Option<(f64, f64)> {
    let mut evals = 0;
    let mut eval = |t: f64, evals: &mut usize| {
        *evals += 1;
        let v = phi(t);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut best = (0.0, phi0);
    // find any decreasing point, shrinking the trial step
    let mut t = t0;
    let mut ft = eval(t, &mut evals);
    let mut upper = None;
    while ft >= phi0 {
        if evals >= budget / 2 {
            return None;
        }
        upper = Some(t);
        t *= 0.25;
        ft = eval(t, &mut evals);
    }
    best = if ft < best.1 { (t, ft) } else { best };
    // expand until the loss turns up again
    let (mut a, mut b) = (0.0, t);
    let mut c = match upper {
        Some(u) => u,
        None => loop {
            let next = 2.0 * b;
            let fnext = eval(next, &mut evals);
            if fnext < best.1 {
                best = (next, fnext);
                a = b;
                b = next;
                if evals >= budget {
                    return Some(best);
                }
            } else {
                break next;
            }
        },
    };
    let _ = b;
    // golden section on [a, c] around the best point
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = c - INV_PHI * (c - a);
    let mut x2 = a + INV_PHI * (c - a);
    let mut f1 = eval(x1, &mut evals);
    let mut f2 = eval(x2, &mut evals);
    while evals < budget && (c - a) > 1e-12 * c.abs() {
        if f1 < best.1 {
            best = (x1, f1);
        }
        if f2 < best.1 {
            best = (x2, f2);
        }
        if f1 <= f2 {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - INV_PHI * (c - a);
            f1 = eval(x1, &mut evals);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (c - a);
            f2 = eval(x2, &mut evals);
        }
    }
    for (x, f) in [(x1, f1), (x2, f2)] {
        if f < best.1 {
            best = (x, f);
        }
    }
    (best.1 < phi0).then_some(best)
}

/// Repeated line searches along the gradient projected onto the Hessian's
/// low-curvature eigenspace. Only loss-reducing steps are taken.
pub fn low_curvature_minimize<M: Trainable + Clone>(net: &M, data: &Dataset, cfg: &SubspaceConfig) -> Result<(M, Vec<HistoryRow>, StopReason), OptimError> {
    check_data(net, data)?;
    if !cfg.tau.is_finite() {
        return Err(OptimError::InvalidConfig(format!("tau must be finite, got {}", cfg.tau)));
    }
    let n = net.n_params();
    if n > MAX_HESSIAN_PARAMS {
        return Err(OptimError::TooLarge { n, max: MAX_HESSIAN_PARAMS });
    }
    let mut theta = net.params().to_vec();
    let mut g = vec![0.0; n];
    let mut loss = net.loss_grad_at(&theta, data, None, &mut g);
    if !loss.is_finite() {
        return Err(OptimError::NonFiniteLoss { step: 0 });
    }
    let mut history = vec![history_row(0, loss, data, "subspace")];
    let mut trial = vec![0.0; n];
    let mut stop = StopReason::MaxIters;
    for step in 1..=cfg.max_steps {
        let h = net.hessian_at(&theta, data);
        let eig = sym_eigendecompose(&h)?;
        let gh = project_low_curvature(&eig, &g, cfg.tau);
        let gn = norm(&gh);
        if !(gn > 0.0) {
            stop = StopReason::SubspaceConverged;
            break;
        }
        let t0 = 1e-4 * norm(&theta).max(1.0) / gn;
        let mut phi = |t: f64| {
            for i in 0..n {
                trial[i] = theta[i] - t * gh[i];
            }
            net.loss_at(&trial, data)
        };
        match golden_line_search(&mut phi, loss, t0, cfg.ls_max_evals) {
            Some((t, _)) => {
                axpy(-t, &gh, &mut theta);
                loss = net.loss_grad_at(&theta, data, None, &mut g);
                history.push(history_row(step, loss, data, "subspace"));
            }
            None => {
                stop = StopReason::Stall;
                break;
            }
        }
    }
    let mut out = net.clone();
    out.set_params(&theta);
    Ok((out, history, stop))
}
