use serde::{Deserialize, Serialize};

use super::{adam_minimize, bfgs_minimize, check_data, mse_to_rmse_rel, AdamConfig, BfgsConfig, HistoryRow, OptimError, StopReason};
use crate::net::{assemble_boosted, mlp_init, Activation, Mlp, NetError, Trainable};
use crate::targets::Dataset;

/// How a single network is trained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageOptimizer {
    Adam(AdamConfig),
    Bfgs(BfgsConfig),
    /// Adam warm start followed by BFGS refinement.
    AdamThenBfgs(AdamConfig, BfgsConfig),
}

impl StageOptimizer {
    /// Train `net` on `data`. Adam runs count as `MaxIters` stops.
    pub fn train<M: Trainable + Clone>(&self, net: &M, data: &Dataset, seed: u64) -> Result<(M, Vec<HistoryRow>, StopReason), OptimError> {
        match self {
            StageOptimizer::Adam(cfg) => {
                let (m, h) = adam_minimize(net, data, cfg, seed)?;
                Ok((m, h, StopReason::MaxIters))
            }
            StageOptimizer::Bfgs(cfg) => bfgs_minimize(net, data, cfg),
            StageOptimizer::AdamThenBfgs(a, b) => {
                let (m, mut h, _) = StageOptimizer::Adam(a.clone()).train(net, data, seed)?;
                let offset = h.last().map_or(0, |r| r.step);
                let (m, h2, stop) = bfgs_minimize(&m, data, b)?;
                h.extend(h2.into_iter().map(|mut r| {
                    r.step += offset;
                    r
                }));
                Ok((m, h, stop))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub stage1_hidden: Vec<usize>,
    pub stage2_hidden: Vec<usize>,
    pub activation: Activation,
    pub stage1: StageOptimizer,
    pub stage2: StageOptimizer,
    /// Stage 1 is initialized from `seed`, stage 2 from `seed + 1`.
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostOutcome {
    /// The single assembled network computing `f1 + c·f2`.
    pub net: Mlp,
    pub f1: Mlp,
    /// `None` when stage 1 fit the data exactly.
    pub f2: Option<Mlp>,
    /// RMS of the stage-1 residual; stage 2 is fit to `residual / c`.
    pub c: f64,
    pub stage1_rmse: f64,
    /// Relative RMSE of `f2` against the normalized residual.
    pub stage2_rmse: f64,
    pub assembled_rmse: f64,
    /// Stage-2 rows are expressed in terms of the combined fit `f1 + c·f2`.
    pub history: Vec<HistoryRow>,
    pub stops: Vec<StopReason>,
}

fn rmse_rel_of(net: &Mlp, data: &Dataset) -> Result<f64, NetError> {
    Ok(mse_to_rmse_rel(net.mse(data)?, data))
}

/// Two-stage fit: train `f1`, fit `f2` to the residual rescaled to unit RMS,
/// then fold both into one network of the shared depth.
pub fn boost_train(data: &Dataset, cfg: &BoostConfig) -> Result<BoostOutcome, OptimError> {
    if cfg.stage1_hidden.len() != cfg.stage2_hidden.len() || cfg.stage1_hidden.is_empty() {
        return Err(OptimError::InvalidConfig(format!(
            "stages need equal, nonzero depth (got {} and {} hidden layers)",
            cfg.stage1_hidden.len(),
            cfg.stage2_hidden.len()
        )));
    }
    let dims = |hidden: &[usize]| {
        let mut d = vec![data.dim];
        d.extend_from_slice(hidden);
        d.push(1);
        d
    };
    let f1 = mlp_init(&dims(&cfg.stage1_hidden), cfg.activation, cfg.seed)?;
    check_data(&f1, data)?;
    let (f1, h1, stop1) = cfg.stage1.train(&f1, data, cfg.seed)?;
    let mut history: Vec<HistoryRow> = h1
        .into_iter()
        .map(|mut r| {
            r.phase = "stage1".into();
            r
        })
        .collect();
    let stage1_rmse = rmse_rel_of(&f1, data)?;
    let pred = f1.predict(data)?;
    let residual: Vec<f64> = data.targets.iter().zip(&pred).map(|(y, p)| y - p).collect();
    let c = (residual.iter().map(|r| r * r).sum::<f64>() / residual.len() as f64).sqrt();
    if c == 0.0 {
        return Ok(BoostOutcome {
            net: f1.clone(),
            f1,
            f2: None,
            c,
            stage1_rmse,
            stage2_rmse: 0.0,
            assembled_rmse: stage1_rmse,
            history,
            stops: vec![stop1],
        });
    }
    let scaled = data.with_targets(residual.iter().map(|r| r / c).collect());
    let f2 = mlp_init(&dims(&cfg.stage2_hidden), cfg.activation, cfg.seed + 1)?;
    let (f2, h2, stop2) = cfg.stage2.train(&f2, &scaled, cfg.seed + 1)?;
    let offset = history.last().map_or(0, |r| r.step);
    history.extend(h2.into_iter().map(|r| {
        let mse = c * c * r.mse;
        HistoryRow { step: r.step + offset, mse, rmse_rel: mse_to_rmse_rel(mse, data), phase: "stage2".into() }
    }));
    let stage2_rmse = rmse_rel_of(&f2, &scaled)?;
    let net = assemble_boosted(&f1, &f2, c)?;
    let assembled_rmse = rmse_rel_of(&net, data)?;
    Ok(BoostOutcome { net, f1, f2: Some(f2), c, stage1_rmse, stage2_rmse, assembled_rmse, history, stops: vec![stop1, stop2] })
}
