use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{relative_rmse, BenchError, Predictor};
use crate::net::{pairwise_product_network, Activation, GadgetConfig, Mlp};
use crate::optim::sym_eigendecompose;
use crate::targets::Dataset;

/// Estimated terms of the empirical-loss decomposition, all in relative RMSE.
/// Sampling luck is not estimated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub train_loss: f64,
    pub test_loss: f64,
    pub generalization_gap_est: f64,
    /// Training loss of the reference model; `None` when no reference exists.
    pub reference_loss: Option<f64>,
    /// `train_loss − reference_loss`; `None` when no reference exists.
    pub optimization_error_est: Option<f64>,
}

/// A stand-in for the best achievable model on the training set.
pub enum Reference<'a> {
    /// The method interpolates its training points, so the best training loss is 0.
    Interpolant,
    /// An explicitly constructed model, e.g. a multiplication-gadget network.
    Model(&'a dyn Predictor),
}

/// Reference network for targets a tanh net of the given width can represent
/// to `O(a²)`: `xy` (width ≥ 4) and `dot3` (width ≥ 12).
pub fn constructed_reference(target: &str, activation: Activation, width: usize, a: f64) -> Option<Mlp> {
    if activation != Activation::Tanh {
        return None;
    }
    let cfg = GadgetConfig::with_scale(a).ok()?;
    match target {
        "xy" if width >= 4 => pairwise_product_network(2, &[(0, 1)], cfg).ok(),
        "dot3" if width >= 12 => pairwise_product_network(6, &[(0, 3), (1, 4), (2, 5)], cfg).ok(),
        _ => None,
    }
}

fn shared_points(a: &Dataset, b: &Dataset) -> usize {
    let key = |x: &[f64]| x.iter().map(|v| v.to_bits()).collect::<Vec<u64>>();
    let seen: HashSet<Vec<u64>> = a.rows().map(key).collect();
    b.rows().filter(|x| seen.contains(&key(x))).count()
}

pub fn loss_decomposition_report(model: &dyn Predictor, train: &Dataset, test: &Dataset, reference: Option<Reference<'_>>) -> Result<LossBreakdown, BenchError> {
    let shared = shared_points(train, test);
    if shared > 0 {
        return Err(BenchError::Overlap(shared));
    }
    let train_loss = relative_rmse(&model.predict_all(train)?, &train.targets)?;
    let test_loss = relative_rmse(&model.predict_all(test)?, &test.targets)?;
    let reference_loss = match reference {
        None => None,
        Some(Reference::Interpolant) => Some(0.0),
        Some(Reference::Model(r)) => Some(relative_rmse(&r.predict_all(train)?, &train.targets)?),
    };
    Ok(LossBreakdown {
        train_loss,
        test_loss,
        generalization_gap_est: test_loss - train_loss,
        reference_loss,
        optimization_error_est: reference_loss.map(|r| train_loss - r),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub index: usize,
    pub eigenvalue: f64,
    pub grad_projection_abs: f64,
}

/// Hessian eigenvalues in descending order, each with `|e_i · g|`.
pub fn spectrum_report(net: &Mlp, data: &Dataset) -> Result<Vec<SpectrumRow>, BenchError> {
    let h = net.hessian(data)?;
    let g = net.grad(data)?;
    let eig = sym_eigendecompose(&h)?;
    let n = eig.n();
    Ok((0..n)
        .rev()
        .enumerate()
        .map(|(index, i)| SpectrumRow { index, eigenvalue: eig.values()[i], grad_projection_abs: crate::linalg::dot(eig.vector(i), &g).abs() })
        .collect())
}

/// Fractions of `Σ(e_i·g)²` carried by the top `top` and bottom `bottom`
/// fractions of a descending spectrum.
pub fn gradient_mass_fractions(rows: &[SpectrumRow], top: f64, bottom: f64) -> (f64, f64) {
    let n = rows.len();
    let total: f64 = rows.iter().map(|r| r.grad_projection_abs.powi(2)).sum();
    let k_top = ((top * n as f64).round() as usize).min(n);
    let k_bottom = ((bottom * n as f64).round() as usize).min(n);
    let mass = |rs: &[SpectrumRow]| rs.iter().map(|r| r.grad_projection_abs.powi(2)).sum::<f64>() / total;
    (mass(&rows[..k_top]), mass(&rows[n - k_bottom..]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::mlp_init;
    use crate::targets::{lookup, sample_dataset};

    #[test]
    fn spectrum_satisfies_parseval_and_is_descending() {
        let e = lookup("xy").unwrap();
        let data = sample_dataset(&e.spec, &e.domain, 40, 2).unwrap();
        let net = mlp_init(&[2, 6, 6, 1], Activation::Tanh, 3).unwrap();
        let rows = spectrum_report(&net, &data).unwrap();
        assert_eq!(rows.len(), net.n_params());
        assert!(rows.windows(2).all(|w| w[0].eigenvalue >= w[1].eigenvalue));
        assert!(rows.iter().all(|r| r.eigenvalue.is_finite() && r.grad_projection_abs.is_finite()));
        let g = net.grad(&data).unwrap();
        let gg: f64 = g.iter().map(|v| v * v).sum();
        let mass: f64 = rows.iter().map(|r| r.grad_projection_abs.powi(2)).sum();
        assert!((mass - gg).abs() <= 1e-10 * gg);
        let (top, bottom) = gradient_mass_fractions(&rows, 0.1, 0.5);
        assert!((0.0..=1.0).contains(&top) && (0.0..=1.0).contains(&bottom));
    }

    #[test]
    fn gadget_reference_for_xy_is_nearly_exact() {
        let e = lookup("xy").unwrap();
        let data = sample_dataset(&e.spec, &e.domain, 2000, 8).unwrap();
        let r = constructed_reference("xy", Activation::Tanh, 4, 1e-4).unwrap();
        let l = relative_rmse(&r.predict(&data).unwrap(), &data.targets).unwrap();
        assert!(l <= 1e-6, "{l}");
        assert!(constructed_reference("xy", Activation::Tanh, 3, 1e-4).is_none());
        assert!(constructed_reference("dot3", Activation::Relu, 12, 1e-4).is_none());
        assert!(constructed_reference("cos2x", Activation::Tanh, 40, 1e-4).is_none());
    }

    #[test]
    fn breakdown_identities() {
        let e = lookup("xy").unwrap();
        let train = sample_dataset(&e.spec, &e.domain, 200, 1).unwrap();
        let test = sample_dataset(&e.spec, &e.domain, 500, 2).unwrap();
        let net = mlp_init(&[2, 4, 1], Activation::Tanh, 0).unwrap();
        let gadget = constructed_reference("xy", Activation::Tanh, 4, 1e-3).unwrap();
        let b = loss_decomposition_report(&net, &train, &test, Some(Reference::Model(&gadget))).unwrap();
        assert!((b.train_loss - (b.optimization_error_est.unwrap() + b.reference_loss.unwrap())).abs() <= f64::EPSILON * b.train_loss);
        assert_eq!(b.generalization_gap_est, b.test_loss - b.train_loss);
        let none = loss_decomposition_report(&net, &train, &test, None).unwrap();
        assert!(none.reference_loss.is_none() && none.optimization_error_est.is_none());
        assert!(matches!(loss_decomposition_report(&net, &train, &train, None), Err(BenchError::Overlap(200))));
    }
}
