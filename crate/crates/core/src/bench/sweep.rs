use std::fmt;
use std::str::FromStr;
use std::sync::mpsc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{fit_power_law, relative_rmse, BenchError, PowerLawFit, Predictor, Standardized};
use crate::interp::{delaunay_triangulate, grid_spline_fit, interior_mask, spline_fit_1d};
use crate::net::{mlp_init, modular_net_build, Activation, ModularNet, Trainable};
use crate::optim::{AdamConfig, StageOptimizer};
use crate::targets::{lookup, normalize_inputs, sample_dataset, CatalogEntry, Dataset, Node};

/// Offset between a cell's training seed and the seed of its test set.
const TEST_SEED_OFFSET: u64 = 0x7E57_0000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Simplex,
    /// Interpolating spline of the given order (1D), or tensor-product cubic (2D/3D).
    Spline(usize),
    ReluMlp,
    TanhMlp,
    ModularMlp,
}

impl Method {
    pub fn is_network(self) -> bool {
        matches!(self, Method::ReluMlp | Method::TanhMlp | Method::ModularMlp)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Simplex => f.write_str("simplex"),
            Method::Spline(n) => write!(f, "spline-{n}"),
            Method::ReluMlp => f.write_str("relu-mlp"),
            Method::TanhMlp => f.write_str("tanh-mlp"),
            Method::ModularMlp => f.write_str("modular-mlp"),
        }
    }
}

impl FromStr for Method {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simplex" => Ok(Method::Simplex),
            "relu-mlp" => Ok(Method::ReluMlp),
            "tanh-mlp" => Ok(Method::TanhMlp),
            "modular-mlp" => Ok(Method::ModularMlp),
            _ => s
                .strip_prefix("spline-")
                .and_then(|n| n.parse::<usize>().ok())
                .filter(|n| (1..=5).contains(n))
                .map(Method::Spline)
                .ok_or_else(|| BenchError::UnknownMethod(s.to_string())),
        }
    }
}

/// Network settings for the NN methods of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NnConfig {
    pub hidden_layers: usize,
    /// Width used when parameters are not matched to the data size.
    pub width: usize,
    /// Activation of `modular-mlp` subnets.
    pub modular_activation: Activation,
    pub optimizer: StageOptimizer,
}

impl Default for NnConfig {
    fn default() -> Self {
        NnConfig { hidden_layers: 2, width: 40, modular_activation: Activation::Tanh, optimizer: StageOptimizer::Adam(AdamConfig::default()) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub test_size: usize,
    /// Test points closer than this fraction of the domain width to a face are dropped.
    pub test_margin: f64,
    pub timeout: Duration,
    pub nn: NnConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { test_size: 30_000, test_margin: 0.1, timeout: Duration::from_secs(300), nn: NnConfig::default() }
    }
}

/// One `(size, seed)` cell. Failed cells carry NaN losses and an error message.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: String,
    pub target: String,
    pub n_train: usize,
    pub n_params: usize,
    pub seed: u64,
    pub train_rmse_rel: f64,
    pub test_rmse_rel: f64,
    pub wall_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SweepRow {
    pub fn is_flagged(&self) -> bool {
        self.error.is_some() || !self.train_rmse_rel.is_finite() || !self.test_rmse_rel.is_finite()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// `(n_train, test loss)` for every unflagged row.
    pub fn test_pairs(&self) -> Vec<(f64, f64)> {
        self.rows.iter().filter(|r| !r.is_flagged()).map(|r| (r.n_train as f64, r.test_rmse_rel)).collect()
    }

    /// Power law of test loss against training-set size.
    pub fn fit(&self, floor: f64) -> Result<PowerLawFit, BenchError> {
        fit_power_law(&self.test_pairs(), floor)
    }

    fn sort(&mut self) {
        self.rows.sort_by(|a, b| (&a.method, &a.target, a.n_train, a.seed).cmp(&(&b.method, &b.target, b.n_train, b.seed)));
    }
}

/// Parameter count of `[inputs, w × layers, 1]`.
fn dense_count(inputs: usize, w: usize, layers: usize) -> usize {
    inputs * w + w + layers.saturating_sub(1) * (w * w + w) + w + 1
}

fn modular_arities(entry: &CatalogEntry) -> Vec<usize> {
    entry.spec.nodes().iter().filter(|n| !matches!(n, Node::Var(_) | Node::Const(_))).map(|n| n.arity()).collect()
}

/// Width whose parameter count at `hidden_layers` hidden layers is closest to
/// `target_params` (ties go to the narrower net). For modular nets the count is
/// summed over one subnet per operation node.
pub fn matched_width(method: Method, entry: &CatalogEntry, hidden_layers: usize, target_params: usize) -> usize {
    let count = |w: usize| match method {
        Method::ModularMlp => modular_arities(entry).iter().map(|&a| dense_count(a, w, hidden_layers)).sum(),
        _ => dense_count(entry.spec.dim(), w, hidden_layers),
    };
    (1..=4096).min_by_key(|&w| (count(w) as i64 - target_params as i64).unsigned_abs()).unwrap_or(1)
}

struct CellOutput {
    n_train: usize,
    n_params: usize,
    train: f64,
    test: f64,
}

fn evaluate(model: &dyn Predictor, train: &Dataset, test: &Dataset) -> Result<(f64, f64), BenchError> {
    let tr = relative_rmse(&model.predict_all(train)?, &train.targets)?;
    let te = relative_rmse(&model.predict_all(test)?, &test.targets)?;
    Ok((tr, te))
}

fn grid_points_1d(entry: &CatalogEntry, n: usize) -> Dataset {
    let (lo, hi) = (entry.domain.lo()[0], entry.domain.hi()[0]);
    let xs: Vec<f64> = (0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect();
    let ys: Vec<f64> = xs.iter().map(|x| entry.spec.eval(&[*x]).expect("catalog targets evaluate on their domain")).collect();
    Dataset::from_parts(xs, ys, 1, entry.domain.clone())
}

fn run_cell(method: Method, entry: &CatalogEntry, n: usize, seed: u64, matched: bool, cfg: &SweepConfig) -> Result<CellOutput, BenchError> {
    let d = entry.spec.dim();
    let test = sample_dataset(&entry.spec, &entry.domain, cfg.test_size, seed.wrapping_add(TEST_SEED_OFFSET))?;
    let test = test.filter(&interior_mask(&entry.domain, cfg.test_margin, &test.inputs));
    match method {
        Method::Simplex => {
            let train = sample_dataset(&entry.spec, &entry.domain, n, seed)?;
            let tri = delaunay_triangulate(&train.inputs, &train.targets, d)?;
            let (train_l, test_l) = evaluate(&tri, &train, &test)?;
            Ok(CellOutput { n_train: n, n_params: tri.n_params(), train: train_l, test: test_l })
        }
        Method::Spline(order) if d == 1 => {
            let train = grid_points_1d(entry, n);
            let sp = spline_fit_1d(&train.inputs, &train.targets, order)?;
            let (train_l, test_l) = evaluate(&sp, &train, &test)?;
            Ok(CellOutput { n_train: n, n_params: sp.n_params(), train: train_l, test: test_l })
        }
        Method::Spline(3) if (2..=3).contains(&d) => {
            let m = ((n as f64).powf(1.0 / d as f64).round() as usize).max(4);
            let g = grid_spline_fit(&entry.spec, &entry.domain, m)?;
            let mut inputs = Vec::with_capacity(m.pow(d as u32) * d);
            let mut idx = vec![0usize; d];
            for _ in 0..m.pow(d as u32) {
                inputs.extend(idx.iter().enumerate().map(|(a, &i)| g.axes()[a][i]));
                for a in (0..d).rev() {
                    idx[a] += 1;
                    if idx[a] < m {
                        break;
                    }
                    idx[a] = 0;
                }
            }
            let targets = inputs.chunks_exact(d).map(|x| entry.spec.eval(x)).collect::<Result<Vec<_>, _>>()?;
            let train = Dataset::from_parts(inputs, targets, d, entry.domain.clone());
            let (train_l, test_l) = evaluate(&g, &train, &test)?;
            Ok(CellOutput { n_train: train.len(), n_params: g.coefficients().len(), train: train_l, test: test_l })
        }
        Method::Spline(_) => Err(BenchError::Unsupported { method: method.to_string(), dim: d }),
        Method::ReluMlp | Method::TanhMlp | Method::ModularMlp => {
            let train = sample_dataset(&entry.spec, &entry.domain, n, seed)?;
            let (train_z, stats) = normalize_inputs(&train)?;
            let layers = cfg.nn.hidden_layers;
            let width = if matched { matched_width(method, entry, layers, n * (d + 1)) } else { cfg.nn.width };
            let hidden = vec![width; layers];
            if method == Method::ModularMlp {
                let net = modular_net_build(&entry.spec, &hidden, cfg.nn.modular_activation, seed)?;
                let (net, _, _) = cfg.nn.optimizer.train(&net, &train_z, seed)?;
                let n_params = net.n_params();
                let model = Standardized::<ModularNet> { stats, inner: net };
                let (train_l, test_l) = evaluate(&model, &train, &test)?;
                return Ok(CellOutput { n_train: n, n_params, train: train_l, test: test_l });
            }
            let act = if method == Method::ReluMlp { Activation::Relu } else { Activation::Tanh };
            let mut dims = vec![d];
            dims.extend(&hidden);
            dims.push(1);
            let net = mlp_init(&dims, act, seed)?;
            let (net, _, _) = cfg.nn.optimizer.train(&net, &train_z, seed)?;
            let net = net.fold_input_normalization(&stats)?;
            let (train_l, test_l) = evaluate(&net, &train, &test)?;
            Ok(CellOutput { n_train: n, n_params: net.n_params(), train: train_l, test: test_l })
        }
    }
}

/// [`run_scaling_sweep_with`] under the default configuration.
pub fn run_scaling_sweep(method: Method, target: &str, sizes: &[usize], seeds: &[u64], matched_params: bool) -> Result<SweepResult, BenchError> {
    run_scaling_sweep_with(method, target, sizes, seeds, matched_params, &SweepConfig::default())
}

/// Fits `method` on `target` for every `(size, seed)` cell and measures train
/// and interior-test relative RMSE. A failing or timed-out cell becomes a
/// flagged row; only invalid arguments abort the sweep. A timed-out cell keeps
/// running on its own thread until it finishes, but its result is discarded.
pub fn run_scaling_sweep_with(method: Method, target: &str, sizes: &[usize], seeds: &[u64], matched_params: bool, cfg: &SweepConfig) -> Result<SweepResult, BenchError> {
    if sizes.is_empty() || seeds.is_empty() || sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(BenchError::BadSizes);
    }
    let entry = lookup(target)?;
    if let Method::Spline(order) = method {
        let d = entry.spec.dim();
        if d > 3 || (d > 1 && order != 3) {
            return Err(BenchError::Unsupported { method: method.to_string(), dim: d });
        }
    }
    if matches!(method, Method::Simplex) && entry.spec.dim() > 3 {
        return Err(BenchError::Unsupported { method: method.to_string(), dim: entry.spec.dim() });
    }
    let mut result = SweepResult::default();
    for &n in sizes {
        for &seed in seeds {
            let start = Instant::now();
            let (tx, rx) = mpsc::channel();
            let (entry_c, cfg_c) = (entry.clone(), cfg.clone());
            std::thread::spawn(move || {
                let _ = tx.send(run_cell(method, &entry_c, n, seed, matched_params, &cfg_c));
            });
            let outcome = match rx.recv_timeout(cfg.timeout) {
                Ok(r) => r,
                Err(mpsc::RecvTimeoutError::Timeout) => Err(BenchError::Timeout(cfg.timeout.as_secs_f64())),
                Err(mpsc::RecvTimeoutError::Disconnected) => Err(BenchError::Format("sweep cell panicked".into())),
            };
            let wall_seconds = start.elapsed().as_secs_f64();
            let mut row = SweepRow {
                method: method.to_string(),
                target: target.to_string(),
                n_train: n,
                n_params: 0,
                seed,
                train_rmse_rel: f64::NAN,
                test_rmse_rel: f64::NAN,
                wall_seconds,
                error: None,
            };
            match outcome {
                Ok(out) if out.train.is_finite() && out.test.is_finite() => {
                    row.n_train = out.n_train;
                    row.n_params = out.n_params;
                    row.train_rmse_rel = out.train;
                    row.test_rmse_rel = out.test;
                }
                Ok(out) => {
                    row.n_train = out.n_train;
                    row.n_params = out.n_params;
                    row.error = Some("non-finite loss".into());
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            result.rows.push(row);
        }
    }
    result.sort();
    Ok(result)
}
