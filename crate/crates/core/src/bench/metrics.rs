use serde::{Deserialize, Serialize};

use super::BenchError;

/// Default cutoff for power-law fits: losses at or below this sit on the
/// precision floor and would flatten the slope.
pub const DEFAULT_FLOOR: f64 = 1e-13;

/// `sqrt(Σ(p − y)² / Σy²)`.
pub fn relative_rmse(preds: &[f64], targets: &[f64]) -> Result<f64, BenchError> {
    if preds.len() != targets.len() || preds.is_empty() {
        return Err(BenchError::LengthMismatch { preds: preds.len(), targets: targets.len() });
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (p, y) in preds.iter().zip(targets) {
        num += (p - y) * (p - y);
        den += y * y;
    }
    if den == 0.0 {
        return Err(BenchError::ZeroTargets);
    }
    Ok((num / den).sqrt())
}

/// `loss ≈ exp(log_intercept) · N^(−alpha)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub log_intercept: f64,
    pub r_squared: f64,
    pub floor_cutoff: f64,
    /// Points used (those strictly above the floor).
    pub n_points: usize,
}

/// OLS on `(ln N, ln loss)` over the points with `loss > floor`.
pub fn fit_power_law(pairs: &[(f64, f64)], floor: f64) -> Result<PowerLawFit, BenchError> {
    if let Some(&(n, loss)) = pairs.iter().find(|(n, l)| !(*n > 0.0) || !(*l > 0.0)) {
        return Err(BenchError::NonPositive { n, loss });
    }
    let pts: Vec<(f64, f64)> = pairs.iter().filter(|(_, l)| *l > floor).map(|(n, l)| (n.ln(), l.ln())).collect();
    if pts.len() < 3 {
        return Err(BenchError::TooFewPoints(pts.len()));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in &pts {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return Err(BenchError::TooFewPoints(1));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(PowerLawFit { alpha: -slope, log_intercept: my - slope * mx, r_squared, floor_cutoff: floor, n_points: pts.len() })
}
