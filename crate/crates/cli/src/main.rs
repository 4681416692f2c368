use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use precision_core::bench::{
    fit_power_law, fmt_f64, read_sweep_csv, relative_rmse, run_scaling_sweep_with, spectrum_report, write_history_csv, write_spectrum_csv,
    write_sweep_csv, Method, NnConfig, Predictor, Standardized, SweepConfig, DEFAULT_FLOOR,
};
use precision_core::interp::{delaunay_triangulate, grid_spline_fit, interior_mask, spline_fit_1d};
use precision_core::net::{mlp_init, modular_net_build, Activation, Mlp};
use precision_core::optim::{boost_train, AdamConfig, BfgsConfig, BoostConfig, StageOptimizer};
use precision_core::targets::{builtin_catalog, lookup, normalize_inputs, sample_dataset, Dataset};

#[derive(Parser)]
#[command(name = "precml", version, about = "High-precision function fitting: interpolation, splines and neural networks")]
struct Cli {
    /// Seed for data sampling and initialization.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Format for tables and metrics.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OptimizerKind {
    Adam,
    Bfgs,
    /// Adam warm start, then BFGS.
    AdamBfgs,
}

#[derive(clap::Args, Clone)]
struct TrainArgs {
    /// Hidden layers of each network.
    #[arg(long, default_value_t = 2)]
    hidden_layers: usize,
    #[arg(long, value_enum, default_value_t = OptimizerKind::Adam)]
    optimizer: OptimizerKind,
    /// Adam learning rate.
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Adam steps.
    #[arg(long, default_value_t = 20_000)]
    steps: usize,
    /// BFGS iteration cap.
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
}

impl TrainArgs {
    fn optimizer(&self) -> StageOptimizer {
        let adam = AdamConfig { lr: self.lr, steps: self.steps, ..AdamConfig::default() };
        let bfgs = BfgsConfig { max_iters: self.max_iters, ..BfgsConfig::default() };
        match self.optimizer {
            OptimizerKind::Adam => StageOptimizer::Adam(adam),
            OptimizerKind::Bfgs => StageOptimizer::Bfgs(bfgs),
            OptimizerKind::AdamBfgs => StageOptimizer::AdamThenBfgs(adam, bfgs),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit one method to one target; writes the model JSON and prints metrics.
    Fit {
        #[arg(long)]
        method: String,
        #[arg(long)]
        target: String,
        /// Training points.
        #[arg(long)]
        size: usize,
        /// Hidden width for network methods.
        #[arg(long, default_value_t = 40)]
        width: usize,
        #[arg(long, default_value_t = 30_000)]
        test_size: usize,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Run a scaling sweep and write its CSV.
    Sweep {
        #[arg(long)]
        method: String,
        #[arg(long)]
        target: String,
        /// Ascending training sizes, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        /// Seeds, comma separated (defaults to --seed).
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Choose network widths so parameters ≈ |D|(d+1).
        #[arg(long)]
        matched_params: bool,
        #[arg(long, default_value_t = 40)]
        width: usize,
        #[arg(long, default_value_t = 30_000)]
        test_size: usize,
        /// Per-cell wall-clock limit in seconds.
        #[arg(long, default_value_t = 300.0)]
        timeout: f64,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Fit a power law to the test losses of a sweep CSV.
    Powerlaw {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_FLOOR)]
        floor: f64,
    },
    /// Hessian spectrum of a saved network on freshly sampled target data.
    Spectrum {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 500)]
        size: usize,
    },
    /// Two-stage boosted training; writes the assembled model and the loss history.
    Boost {
        #[arg(long)]
        target: String,
        /// Stage widths, e.g. 20,20.
        #[arg(long, value_delimiter = ',', default_value = "20,20")]
        widths: Vec<usize>,
        #[arg(long, default_value_t = 500)]
        size: usize,
        /// relu or tanh.
        #[arg(long, default_value = "tanh")]
        activation: Activation,
        /// History CSV path (stdout when omitted).
        #[arg(long)]
        history: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// List the built-in targets.
    Catalog,
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn write_json_file(path: Option<&Path>, value: &impl serde::Serialize) -> Result<()> {
    let mut w = open_out(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Key/value metrics as a two-column CSV or a JSON object.
fn print_metrics(format: Format, pairs: &[(&str, serde_json::Value)]) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match format {
        Format::Json => {
            let map: serde_json::Map<String, serde_json::Value> = pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
            writeln!(out, "{}", serde_json::to_string_pretty(&map)?)?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["metric", "value"])?;
            for (k, v) in pairs {
                let text = match v {
                    serde_json::Value::Number(n) => n.as_f64().filter(|_| n.is_f64()).map(fmt_f64).unwrap_or_else(|| n.to_string()),
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                w.write_record([*k, text.as_str()])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn eval_rmse(model: &dyn Predictor, data: &Dataset) -> Result<f64> {
    Ok(relative_rmse(&model.predict_all(data)?, &data.targets)?)
}

fn net_dims(d: usize, hidden: &[usize]) -> Vec<usize> {
    let mut dims = vec![d];
    dims.extend_from_slice(hidden);
    dims.push(1);
    dims
}

fn run(cli: Cli) -> Result<()> {
    let out = cli.out.as_deref();
    match cli.command {
        Command::Catalog => {
            let entries = builtin_catalog();
            match cli.format {
                Format::Json => {
                    let list: Vec<_> = entries
                        .iter()
                        .map(|e| json!({"name": e.spec.name(), "dim": e.spec.dim(), "max_arity": e.spec.max_arity(), "lo": e.domain.lo(), "hi": e.domain.hi(), "description": e.description}))
                        .collect();
                    write_json_file(out, &list)?;
                }
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(open_out(out)?);
                    w.write_record(["name", "dim", "max_arity", "description"])?;
                    for e in &entries {
                        w.write_record([e.spec.name(), &e.spec.dim().to_string(), &e.spec.max_arity().to_string(), e.description])?;
                    }
                    w.flush()?;
                }
            }
        }
        Command::Fit { method, target, size, width, test_size, train } => {
            let method: Method = method.parse()?;
            let entry = lookup(&target)?;
            let d = entry.spec.dim();
            let data = sample_dataset(&entry.spec, &entry.domain, size, cli.seed)?;
            let test = sample_dataset(&entry.spec, &entry.domain, test_size, cli.seed.wrapping_add(0x7E57_0000))?;
            let test = test.filter(&interior_mask(&entry.domain, 0.1, &test.inputs));
            let hidden = vec![width; train.hidden_layers];
            let (model_json, n_params, train_rmse, test_rmse) = match method {
                Method::Simplex => {
                    let tri = delaunay_triangulate(&data.inputs, &data.targets, d)?;
                    (serde_json::to_value(&tri)?, tri.n_params(), eval_rmse(&tri, &data)?, eval_rmse(&tri, &test)?)
                }
                Method::Spline(order) if d == 1 => {
                    let mut pts: Vec<(f64, f64)> = data.inputs.iter().copied().zip(data.targets.iter().copied()).collect();
                    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                    pts.dedup_by(|a, b| a.0 == b.0);
                    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
                    let sp = spline_fit_1d(&xs, &ys, order)?;
                    (serde_json::to_value(&sp)?, sp.n_params(), eval_rmse(&sp, &data)?, eval_rmse(&sp, &test)?)
                }
                Method::Spline(3) => {
                    let m = ((size as f64).powf(1.0 / d as f64).round() as usize).max(4);
                    let g = grid_spline_fit(&entry.spec, &entry.domain, m)?;
                    (serde_json::to_value(&g)?, g.coefficients().len(), eval_rmse(&g, &data)?, eval_rmse(&g, &test)?)
                }
                Method::Spline(_) => bail!("method {method} needs a 1D target or order 3"),
                Method::ModularMlp => {
                    let (z, stats) = normalize_inputs(&data)?;
                    let net = modular_net_build(&entry.spec, &hidden, Activation::Tanh, cli.seed)?;
                    let (net, _, _) = train.optimizer().train(&net, &z, cli.seed)?;
                    let n = precision_core::net::Trainable::n_params(&net);
                    let model = Standardized { stats: stats.clone(), inner: net };
                    let tr = eval_rmse(&model, &data)?;
                    let te = eval_rmse(&model, &test)?;
                    (json!({"normalization": stats, "net": model.inner}), n, tr, te)
                }
                Method::ReluMlp | Method::TanhMlp => {
                    let act = if method == Method::ReluMlp { Activation::Relu } else { Activation::Tanh };
                    let (z, stats) = normalize_inputs(&data)?;
                    let net = mlp_init(&net_dims(d, &hidden), act, cli.seed)?;
                    let (net, _, _) = train.optimizer().train(&net, &z, cli.seed)?;
                    let net = net.fold_input_normalization(&stats)?;
                    (serde_json::to_value(&net)?, net.n_params(), eval_rmse(&net, &data)?, eval_rmse(&net, &test)?)
                }
            };
            if let Some(p) = out {
                write_json_file(Some(p), &model_json)?;
            }
            print_metrics(
                cli.format,
                &[
                    ("method", json!(method.to_string())),
                    ("target", json!(target)),
                    ("n_train", json!(data.len())),
                    ("n_params", json!(n_params)),
                    ("seed", json!(cli.seed)),
                    ("train_rmse_rel", json!(train_rmse)),
                    ("test_rmse_rel", json!(test_rmse)),
                ],
            )?;
        }
        Command::Sweep { method, target, sizes, seeds, matched_params, width, test_size, timeout, train } => {
            let method: Method = method.parse()?;
            let seeds = if seeds.is_empty() { vec![cli.seed] } else { seeds };
            if !(timeout > 0.0) {
                bail!("--timeout must be positive");
            }
            let cfg = SweepConfig {
                test_size,
                timeout: Duration::from_secs_f64(timeout),
                nn: NnConfig { hidden_layers: train.hidden_layers, width, optimizer: train.optimizer(), ..NnConfig::default() },
                ..SweepConfig::default()
            };
            let result = run_scaling_sweep_with(method, &target, &sizes, &seeds, matched_params, &cfg)?;
            for r in result.rows.iter().filter(|r| r.is_flagged()) {
                eprintln!("flagged cell n_train={} seed={}: {}", r.n_train, r.seed, r.error.as_deref().unwrap_or("non-finite loss"));
            }
            match cli.format {
                Format::Csv => {
                    let w = open_out(out)?;
                    write_sweep_csv(w, &result)?;
                }
                Format::Json => write_json_file(out, &result.rows)?,
            }
        }
        Command::Powerlaw { input, floor } => {
            let f = File::open(&input).with_context(|| format!("opening {}", input.display()))?;
            let sweep = read_sweep_csv(f)?;
            let fit = fit_power_law(&sweep.test_pairs(), floor)?;
            print_metrics(
                cli.format,
                &[
                    ("alpha", json!(fit.alpha)),
                    ("log_intercept", json!(fit.log_intercept)),
                    ("r_squared", json!(fit.r_squared)),
                    ("floor_cutoff", json!(fit.floor_cutoff)),
                    ("n_points", json!(fit.n_points)),
                ],
            )?;
        }
        Command::Spectrum { model, target, size } => {
            let text = std::fs::read_to_string(&model).with_context(|| format!("reading {}", model.display()))?;
            let net: Mlp = serde_json::from_str(&text).context("model file is not an MLP")?;
            let entry = lookup(&target)?;
            let data = sample_dataset(&entry.spec, &entry.domain, size, cli.seed)?;
            let rows = spectrum_report(&net, &data)?;
            match cli.format {
                Format::Csv => write_spectrum_csv(open_out(out)?, &rows)?,
                Format::Json => write_json_file(out, &rows)?,
            }
        }
        Command::Boost { target, widths, size, activation, history, train } => {
            if widths.len() != 2 || widths.contains(&0) {
                bail!("--widths takes two positive widths, e.g. 20,20");
            }
            let entry = lookup(&target)?;
            let data = sample_dataset(&entry.spec, &entry.domain, size, cli.seed)?;
            let (z, stats) = normalize_inputs(&data)?;
            let opt = train.optimizer();
            let cfg = BoostConfig {
                stage1_hidden: vec![widths[0]; train.hidden_layers],
                stage2_hidden: vec![widths[1]; train.hidden_layers],
                activation,
                stage1: opt.clone(),
                stage2: opt,
                seed: cli.seed,
            };
            let outcome = boost_train(&z, &cfg)?;
            let net = outcome.net.fold_input_normalization(&stats)?;
            write_history_csv(open_out(history.as_deref())?, &outcome.history)?;
            if let Some(p) = out {
                write_json_file(Some(p), &net)?;
            }
            let assembled = eval_rmse(&net, &data)?;
            let mut err = io::stderr().lock();
            writeln!(err, "stage1_rmse_rel={} c={} assembled_rmse_rel={}", fmt_f64(outcome.stage1_rmse), fmt_f64(outcome.c), fmt_f64(assembled))?;
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
