use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Activation, NetError, Trainable};
use crate::linalg::{axpy, dot};
use crate::targets::{Dataset, NormStats};

/// Dense Hessians are stored in full; this bounds their size.
pub const MAX_HESSIAN_PARAMS: usize = 5000;

/// Fully connected network `T_{k+1} ∘ σ ∘ T_k ∘ … ∘ σ ∘ T_1` with a scalar output.
///
/// Parameters are one flat vector: for each affine map in order, its weight
/// matrix (row-major, one row per output unit) followed by its bias vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpRepr")]
pub struct Mlp {
    layer_dims: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
}

#[derive(Deserialize)]
struct MlpRepr {
    layer_dims: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
}

impl TryFrom<MlpRepr> for Mlp {
    type Error = NetError;

    fn try_from(r: MlpRepr) -> Result<Self, NetError> {
        Mlp::new(r.layer_dims, r.activation, r.params)
    }
}

pub(crate) fn count_params(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

fn check_dims(dims: &[usize]) -> Result<(), NetError> {
    if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
        return Err(NetError::InvalidDims(dims.to_vec()));
    }
    if dims[dims.len() - 1] != 1 {
        return Err(NetError::InvalidDims(dims.to_vec()));
    }
    Ok(())
}

/// Per-thread buffers for forward and backward passes.
#[derive(Clone, Debug, Default)]
pub struct Workspace {
    /// Post-activation values per layer; `acts[0]` is the input.
    acts: Vec<Vec<f64>>,
    /// Pre-activation derivatives `σ'(z)` per hidden layer.
    slopes: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl Workspace {
    fn for_dims(dims: &[usize]) -> Self {
        Workspace {
            acts: dims.iter().map(|&d| vec![0.0; d]).collect(),
            slopes: dims.iter().map(|&d| vec![0.0; d]).collect(),
            delta: Vec::new(),
            delta_prev: Vec::new(),
        }
    }
}

impl Mlp {
    pub fn new(layer_dims: Vec<usize>, activation: Activation, params: Vec<f64>) -> Result<Self, NetError> {
        check_dims(&layer_dims)?;
        let n = count_params(&layer_dims);
        if params.len() != n {
            return Err(NetError::DimensionMismatch { expected: n, got: params.len() });
        }
        Ok(Mlp { layer_dims, activation, params })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    /// Number of affine maps (hidden layers + 1).
    pub fn depth(&self) -> usize {
        self.layer_dims.len() - 1
    }

    /// Hidden-layer widths, `[w_1, …, w_k]`.
    pub fn hidden_widths(&self) -> &[usize] {
        &self.layer_dims[1..self.layer_dims.len() - 1]
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Offsets of layer `l`'s weights and bias in the flat parameter vector.
    pub fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let w = count_params(&self.layer_dims[..=l]);
        (w, w + self.layer_dims[l] * self.layer_dims[l + 1])
    }

    pub fn with_params(&self, params: Vec<f64>) -> Result<Self, NetError> {
        Mlp::new(self.layer_dims.clone(), self.activation, params)
    }

    pub fn workspace(&self) -> Workspace {
        Workspace::for_dims(&self.layer_dims)
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64, NetError> {
        if x.len() != self.input_dim() {
            return Err(NetError::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        Ok(self.forward_at(&self.params, x, &mut self.workspace()))
    }

    /// Network output at parameters `theta` (which must have the right length).
    pub fn forward_at(&self, theta: &[f64], x: &[f64], ws: &mut Workspace) -> f64 {
        ws.acts[0].copy_from_slice(x);
        let mut off = 0;
        let last = self.depth() - 1;
        for l in 0..=last {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let (w, b) = theta[off..off + n_in * n_out + n_out].split_at(n_in * n_out);
            off += n_in * n_out + n_out;
            let (before, after) = ws.acts.split_at_mut(l + 1);
            let input = &before[l];
            let out = &mut after[0];
            for i in 0..n_out {
                let z = dot(&w[i * n_in..(i + 1) * n_in], input) + b[i];
                if l == last {
                    out[i] = z;
                } else {
                    let (a, s) = self.activation.value_and_slope(z);
                    out[i] = a;
                    ws.slopes[l + 1][i] = s;
                }
            }
        }
        ws.acts[last + 1][0]
    }

    /// Adds `upstream · ∂f/∂θ` to `grad` for the sample whose forward pass is
    /// in `ws`; if `grad_input` is given, writes `upstream · ∂f/∂x` there.
    pub(crate) fn backward(&self, theta: &[f64], ws: &mut Workspace, upstream: f64, grad: &mut [f64], grad_input: Option<&mut [f64]>) {
        let depth = self.depth();
        ws.delta.clear();
        ws.delta.push(upstream);
        let mut end = theta.len();
        for l in (0..depth).rev() {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let start = end - n_in * n_out - n_out;
            let w = &theta[start..start + n_in * n_out];
            {
                let (gw, gb) = grad[start..end].split_at_mut(n_in * n_out);
                let a = &ws.acts[l];
                for i in 0..n_out {
                    let d = ws.delta[i];
                    gb[i] += d;
                    axpy(d, a, &mut gw[i * n_in..(i + 1) * n_in]);
                }
            }
            if l > 0 || grad_input.is_some() {
                ws.delta_prev.clear();
                ws.delta_prev.resize(n_in, 0.0);
                for i in 0..n_out {
                    axpy(ws.delta[i], &w[i * n_in..(i + 1) * n_in], &mut ws.delta_prev);
                }
                if l > 0 {
                    for (dp, s) in ws.delta_prev.iter_mut().zip(&ws.slopes[l]) {
                        *dp *= s;
                    }
                }
                std::mem::swap(&mut ws.delta, &mut ws.delta_prev);
            }
            end = start;
        }
        if let Some(gi) = grad_input {
            gi.copy_from_slice(&ws.delta[..self.input_dim()]);
        }
    }

    pub fn predict(&self, data: &Dataset) -> Result<Vec<f64>, NetError> {
        self.check_data(data)?;
        let mut ws = self.workspace();
        Ok(data.rows().map(|x| self.forward_at(&self.params, x, &mut ws)).collect())
    }

    fn check_data(&self, data: &Dataset) -> Result<(), NetError> {
        if data.dim != self.input_dim() {
            return Err(NetError::DimensionMismatch { expected: self.input_dim(), got: data.dim });
        }
        if data.is_empty() {
            return Err(NetError::EmptyData);
        }
        Ok(())
    }

    /// Mean squared error over `data`.
    pub fn mse(&self, data: &Dataset) -> Result<f64, NetError> {
        self.check_data(data)?;
        Ok(self.loss_at(&self.params, data))
    }

    /// Exact gradient of the mean squared error with respect to the parameters.
    pub fn grad(&self, data: &Dataset) -> Result<Vec<f64>, NetError> {
        self.check_data(data)?;
        let mut g = vec![0.0; self.n_params()];
        self.loss_grad_at(&self.params, data, None, &mut g);
        Ok(g)
    }

    /// Hessian of the mean squared error, row-major `N × N`.
    ///
    /// `∇²L = (2/n)·Σ ∇f_i ∇f_iᵀ + (2/n)·Σ r_i ∇²f_i`. The first term is
    /// formed exactly from per-sample output gradients; the second by central
    /// differences of `Σ r_i ∇f_i` with the residuals held at their values at
    /// `θ`. Differencing only the residual-weighted term scales its error by
    /// the residuals, so near an interpolating minimum the error shrinks with
    /// the loss instead of sitting at the size of the Gauss–Newton term.
    pub fn hessian(&self, data: &Dataset) -> Result<Vec<f64>, NetError> {
        self.check_data(data)?;
        let n = self.n_params();
        if n > MAX_HESSIAN_PARAMS {
            return Err(NetError::TooManyParams { n, max: MAX_HESSIAN_PARAMS });
        }
        Ok(self.hessian_at(&self.params, data))
    }

    /// Rewrites the first layer so the network takes raw inputs instead of
    /// inputs normalized by `stats`.
    pub fn fold_input_normalization(&self, stats: &NormStats) -> Result<Mlp, NetError> {
        let (n_in, n_out) = (self.layer_dims[0], self.layer_dims[1]);
        if stats.mean.len() != n_in {
            return Err(NetError::DimensionMismatch { expected: n_in, got: stats.mean.len() });
        }
        let mut p = self.params.clone();
        let (w, rest) = p.split_at_mut(n_in * n_out);
        for i in 0..n_out {
            let row = &mut w[i * n_in..(i + 1) * n_in];
            let mut shift = 0.0;
            for j in 0..n_in {
                row[j] /= stats.std[j];
                shift += row[j] * stats.mean[j];
            }
            rest[i] -= shift;
        }
        self.with_params(p)
    }
}

/// Symmetrized central-difference Hessian of any trainable model's loss at `theta`.
pub(crate) fn fd_hessian<M: Trainable + ?Sized>(model: &M, theta: &[f64], data: &Dataset) -> Vec<f64> {
    let n = theta.len();
    let mut h = vec![0.0; n * n];
    let mut th = theta.to_vec();
    let (mut gp, mut gm) = (vec![0.0; n], vec![0.0; n]);
    for i in 0..n {
        let step = 1e-5 * (1.0 + theta[i].abs());
        th[i] = theta[i] + step;
        let up = th[i] - theta[i];
        model.loss_grad_at(&th, data, None, &mut gp);
        th[i] = theta[i] - step;
        let down = theta[i] - th[i];
        model.loss_grad_at(&th, data, None, &mut gm);
        th[i] = theta[i];
        let inv = 1.0 / (up + down);
        for j in 0..n {
            h[i * n + j] = (gp[j] - gm[j]) * inv;
        }
    }
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (h[i * n + j] + h[j * n + i]);
            h[i * n + j] = s;
            h[j * n + i] = s;
        }
    }
    h
}

impl Trainable for Mlp {
    fn input_dim(&self) -> usize {
        Mlp::input_dim(self)
    }

    fn n_params(&self) -> usize {
        self.params.len()
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn set_params(&mut self, theta: &[f64]) {
        self.params.copy_from_slice(theta);
    }

    fn loss_grad_at(&self, theta: &[f64], data: &Dataset, rows: Option<&[usize]>, grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut ws = self.workspace();
        let mut sse = 0.0;
        let mut visit = |i: usize, sse: &mut f64| {
            let r = self.forward_at(theta, data.row(i), &mut ws) - data.targets[i];
            *sse += r * r;
            self.backward(theta, &mut ws, r, grad, None);
        };
        let count = match rows {
            Some(idx) => {
                idx.iter().for_each(|&i| visit(i, &mut sse));
                idx.len()
            }
            None => {
                (0..data.len()).for_each(|i| visit(i, &mut sse));
                data.len()
            }
        };
        let scale = 2.0 / count as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        sse / count as f64
    }

    fn hessian_at(&self, theta: &[f64], data: &Dataset) -> Vec<f64> {
        let n = theta.len();
        let m = data.len();
        let scale = 2.0 / m as f64;
        let mut ws = self.workspace();
        let mut h = vec![0.0; n * n];
        let mut jrow = vec![0.0; n];
        let mut resid = Vec::with_capacity(m);
        for i in 0..m {
            resid.push(self.forward_at(theta, data.row(i), &mut ws) - data.targets[i]);
            jrow.iter_mut().for_each(|v| *v = 0.0);
            self.backward(theta, &mut ws, 1.0, &mut jrow, None);
            for a in 0..n {
                let ja = scale * jrow[a];
                if ja != 0.0 {
                    axpy(ja, &jrow[a..], &mut h[a * n + a..(a + 1) * n]);
                }
            }
        }
        // residual-weighted gradient `Σ r_i ∇f_i` at a perturbed θ
        let weighted = |th: &[f64], out: &mut [f64], ws: &mut Workspace| {
            out.iter_mut().for_each(|v| *v = 0.0);
            for (i, &r) in resid.iter().enumerate() {
                self.forward_at(th, data.row(i), ws);
                self.backward(th, ws, r, out, None);
            }
        };
        let mut th = theta.to_vec();
        let (mut gp, mut gm) = (vec![0.0; n], vec![0.0; n]);
        let mut curv = vec![0.0; n * n];
        for k in 0..n {
            let step = 1e-5 * (1.0 + theta[k].abs());
            th[k] = theta[k] + step;
            let up = th[k] - theta[k];
            weighted(&th, &mut gp, &mut ws);
            th[k] = theta[k] - step;
            let down = theta[k] - th[k];
            weighted(&th, &mut gm, &mut ws);
            th[k] = theta[k];
            let inv = scale / (up + down);
            for j in 0..n {
                curv[k * n + j] = (gp[j] - gm[j]) * inv;
            }
        }
        for a in 0..n {
            for b in a..n {
                let v = h[a * n + b] + 0.5 * (curv[a * n + b] + curv[b * n + a]);
                h[a * n + b] = v;
                h[b * n + a] = v;
            }
        }
        h
    }

    fn loss_at(&self, theta: &[f64], data: &Dataset) -> f64 {
        let mut ws = self.workspace();
        let sse: f64 = (0..data.len())
            .map(|i| {
                let r = self.forward_at(theta, data.row(i), &mut ws) - data.targets[i];
                r * r
            })
            .sum();
        sse / data.len() as f64
    }
}

/// Uniform `±1/√fan_in` weights and zero biases, deterministic in `seed`.
pub fn mlp_init(layer_dims: &[usize], activation: Activation, seed: u64) -> Result<Mlp, NetError> {
    check_dims(layer_dims)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Vec::with_capacity(count_params(layer_dims));
    for w in layer_dims.windows(2) {
        let bound = 1.0 / (w[0] as f64).sqrt();
        params.extend((0..w[0] * w[1]).map(|_| rng.gen_range(-bound..bound)));
        params.extend(std::iter::repeat(0.0).take(w[1]));
    }
    Mlp::new(layer_dims.to_vec(), activation, params)
}

/// Network output at `x`.
pub fn forward(net: &Mlp, x: &[f64]) -> Result<f64, NetError> {
    net.forward(x)
}

/// Gradient of the mean squared error over `data`.
pub fn grad(net: &Mlp, data: &Dataset) -> Result<Vec<f64>, NetError> {
    net.grad(data)
}

/// Finite-difference Hessian of the mean squared error over `data`.
pub fn hessian(net: &Mlp, data: &Dataset) -> Result<Vec<f64>, NetError> {
    net.hessian(data)
}

/// Depth sufficient for a ReLU network to represent products of `d` inputs:
/// `⌈log2(d+1)⌉ + 1`.
pub fn relu_depth_bound(d: usize) -> usize {
    assert!(d >= 1, "dimension must be positive");
    (usize::BITS - d.leading_zeros()) as usize + 1
}

/// Combines two networks into one computing `f1(x) + c·f2(x)` using
/// block-diagonal hidden weights.
pub fn assemble_boosted(f1: &Mlp, f2: &Mlp, c: f64) -> Result<Mlp, NetError> {
    if f1.activation != f2.activation {
        return Err(NetError::ActivationMismatch);
    }
    if f1.input_dim() != f2.input_dim() || f1.depth() != f2.depth() {
        return Err(NetError::ShapeMismatch(format!("{:?} vs {:?}", f1.layer_dims, f2.layer_dims)));
    }
    let depth = f1.depth();
    if depth == 1 {
        // no hidden layer: the two affine maps add directly
        let p = f1.params.iter().zip(&f2.params).map(|(a, b)| a + c * b).collect();
        return Mlp::new(f1.layer_dims.clone(), f1.activation, p);
    }
    let mut dims = vec![f1.input_dim()];
    for l in 1..depth {
        dims.push(f1.layer_dims[l] + f2.layer_dims[l]);
    }
    dims.push(1);
    let mut params = Vec::with_capacity(count_params(&dims));
    for l in 0..depth {
        let (w1, b1) = f1.layer_offsets(l);
        let (w2, b2) = f2.layer_offsets(l);
        let (in1, out1) = (f1.layer_dims[l], f1.layer_dims[l + 1]);
        let (in2, out2) = (f2.layer_dims[l], f2.layer_dims[l + 1]);
        let p1 = &f1.params;
        let p2 = &f2.params;
        if l + 1 == depth {
            params.extend_from_slice(&p1[w1..b1]);
            params.extend(p2[w2..b2].iter().map(|v| c * v));
            params.push(p1[b1] + c * p2[b2]);
        } else if l == 0 {
            // shared input: stack the rows
            params.extend_from_slice(&p1[w1..b1]);
            params.extend_from_slice(&p2[w2..b2]);
            params.extend_from_slice(&p1[b1..b1 + out1]);
            params.extend_from_slice(&p2[b2..b2 + out2]);
        } else {
            for i in 0..out1 {
                params.extend_from_slice(&p1[w1 + i * in1..w1 + (i + 1) * in1]);
                params.extend(std::iter::repeat(0.0).take(in2));
            }
            for i in 0..out2 {
                params.extend(std::iter::repeat(0.0).take(in1));
                params.extend_from_slice(&p2[w2 + i * in2..w2 + (i + 1) * in2]);
            }
            params.extend_from_slice(&p1[b1..b1 + out1]);
            params.extend_from_slice(&p2[b2..b2 + out2]);
        }
    }
    Mlp::new(dims, f1.activation, params)
}

/// Parameters of an assembled network, not counting the off-diagonal zero blocks.
pub fn boosted_param_count(f1: &Mlp, f2: &Mlp) -> usize {
    f1.n_params() + f2.n_params()
}
