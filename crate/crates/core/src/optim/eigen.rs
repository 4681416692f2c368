use super::OptimError;
use crate::net::MAX_HESSIAN_PARAMS;

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenSystem {
    n: usize,
    values: Vec<f64>,
    /// Row `i` is the unit eigenvector for `values[i]` (i.e. `Vᵀ`, row-major).
    vectors_t: Vec<f64>,
}

impl EigenSystem {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors_t[i * self.n..(i + 1) * self.n]
    }

    /// `V Λ Vᵀ`, row-major.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for k in 0..n {
            let (lam, v) = (self.values[k], self.vector(k));
            for i in 0..n {
                let li = lam * v[i];
                let row = &mut out[i * n..(i + 1) * n];
                for j in 0..n {
                    row[j] += li * v[j];
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigenMethod {
    /// Cyclic Jacobi rotations.
    Jacobi,
    /// Householder tridiagonalization and a tridiagonal eigensolver (faer).
    Tridiagonal,
    /// Jacobi up to order [`JACOBI_MAX_ORDER`], tridiagonal above.
    Auto,
}

/// Largest order handled by Jacobi under [`EigenMethod::Auto`]; Jacobi costs
/// several times more flops per sweep than a full tridiagonal solve.
pub const JACOBI_MAX_ORDER: usize = 256;

/// Eigendecomposition of the row-major symmetric `h` (order `√len`).
pub fn sym_eigendecompose(h: &[f64]) -> Result<EigenSystem, OptimError> {
    sym_eigendecompose_with(h, EigenMethod::Auto)
}

pub fn sym_eigendecompose_with(h: &[f64], method: EigenMethod) -> Result<EigenSystem, OptimError> {
    let n = (h.len() as f64).sqrt().round() as usize;
    if n * n != h.len() {
        return Err(OptimError::InvalidConfig(format!("{} entries do not form a square matrix", h.len())));
    }
    if n > MAX_HESSIAN_PARAMS {
        return Err(OptimError::TooLarge { n, max: MAX_HESSIAN_PARAMS });
    }
    let fro = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut asym: f64 = 0.0;
    for i in 0..n {
        for j in 0..i {
            asym = asym.max((h[i * n + j] - h[j * n + i]).abs());
        }
    }
    if asym > 1e-10 * fro {
        return Err(OptimError::NotSymmetric(asym));
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(OptimError::InvalidConfig("matrix has non-finite entries".into()));
    }
    let mut a = h.to_vec();
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = s;
            a[j * n + i] = s;
        }
    }
    let use_jacobi = match method {
        EigenMethod::Jacobi => true,
        EigenMethod::Tridiagonal => false,
        EigenMethod::Auto => n <= JACOBI_MAX_ORDER,
    };
    let (values, vectors_t) = if use_jacobi { jacobi(a, n, fro) } else { tridiagonal(a, n) };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut sys = EigenSystem { n, values: Vec::with_capacity(n), vectors_t: Vec::with_capacity(n * n) };
    for k in order {
        sys.values.push(values[k]);
        sys.vectors_t.extend_from_slice(&vectors_t[k * n..(k + 1) * n]);
    }
    Ok(sys)
}

/// Cyclic Jacobi until the largest off-diagonal entry is at most `1e-14·‖H‖_F`.
/// Returns unsorted eigenvalues and `Vᵀ`.
fn jacobi(mut a: Vec<f64>, n: usize, fro: f64) -> (Vec<f64>, Vec<f64>) {
    let mut vt = vec![0.0; n * n];
    for i in 0..n {
        vt[i * n + i] = 1.0;
    }
    let tol = 1e-14 * fro;
    for _sweep in 0..100 {
        let mut off: f64 = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(a[p * n + q].abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= tol * 1e-3 {
                    continue;
                }
                let (app, aqq) = (a[p * n + p], a[q * n + q]);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta == 0.0 { 1.0 } else { theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt()) };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (x, y) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * x - s * y;
                    a[k * n + q] = s * x + c * y;
                }
                for k in 0..n {
                    let (x, y) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * x - s * y;
                    a[q * n + k] = s * x + c * y;
                }
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                let (lo, hi) = vt.split_at_mut(q * n);
                let (vp, vq) = (&mut lo[p * n..(p + 1) * n], &mut hi[..n]);
                for k in 0..n {
                    let (x, y) = (vp[k], vq[k]);
                    vp[k] = c * x - s * y;
                    vq[k] = s * x + c * y;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), vt)
}

fn tridiagonal(a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    let m = faer::Mat::<f64>::from_fn(n, n, |i, j| a[i * n + j]);
    let eig = m.selfadjoint_eigendecomposition(faer::Side::Lower);
    let s = eig.s().column_vector();
    let u = eig.u();
    let values = (0..n).map(|i| s.read(i)).collect();
    let mut vt = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            vt[i * n + k] = u.read(k, i);
        }
    }
    (values, vt)
}
