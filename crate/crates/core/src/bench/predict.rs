use super::BenchError;
use crate::interp::{GridSpline, InterpError, Spline1D, Triangulation};
use crate::net::{Mlp, ModularNet, NetError};
use crate::targets::{Dataset, NormStats};

/// Anything that maps a point to a scalar prediction.
pub trait Predictor {
    fn input_dim(&self) -> usize;

    fn predict_row(&self, x: &[f64]) -> Result<f64, BenchError>;

    fn predict_all(&self, data: &Dataset) -> Result<Vec<f64>, BenchError> {
        data.rows().map(|x| self.predict_row(x)).collect()
    }
}

impl Predictor for Mlp {
    fn input_dim(&self) -> usize {
        Mlp::input_dim(self)
    }

    fn predict_row(&self, x: &[f64]) -> Result<f64, BenchError> {
        Ok(self.forward(x)?)
    }

    fn predict_all(&self, data: &Dataset) -> Result<Vec<f64>, BenchError> {
        Ok(self.predict(data)?)
    }
}

impl Predictor for ModularNet {
    fn input_dim(&self) -> usize {
        ModularNet::input_dim(self)
    }

    fn predict_row(&self, x: &[f64]) -> Result<f64, BenchError> {
        Ok(self.forward(x)?)
    }
}

impl Predictor for Triangulation {
    fn input_dim(&self) -> usize {
        self.dim()
    }

    fn predict_row(&self, x: &[f64]) -> Result<f64, BenchError> {
        Ok(self.predict(x)?)
    }

    /// Reuses one walking locator so consecutive queries start nearby.
    fn predict_all(&self, data: &Dataset) -> Result<Vec<f64>, BenchError> {
        let mut loc = self.locator();
        data.rows().map(|x| loc.predict(x).map_err(BenchError::from)).collect()
    }
}

impl Predictor for Spline1D {
    fn input_dim(&self) -> usize {
        1
    }

    fn predict_row(&self, x: &[f64]) -> Result<f64, BenchError> {
        if x.len() != 1 {
            return Err(InterpError::DimensionMismatch { expected: 1, got: x.len() }.into());
        }
        Ok(self.eval(x[0])?)
    }
}

impl Predictor for GridSpline {
    fn input_dim(&self) -> usize {
        self.dim()
    }

    fn predict_row(&self, x: &[f64]) -> Result<f64, BenchError> {
        Ok(self.eval(x)?)
    }
}

/// A model trained on standardized inputs, applied to raw ones.
#[derive(Clone, Debug)]
pub struct Standardized<P> {
    pub stats: NormStats,
    pub inner: P,
}

impl<P: Predictor> Predictor for Standardized<P> {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    fn predict_row(&self, x: &[f64]) -> Result<f64, BenchError> {
        if x.len() != self.stats.mean.len() {
            return Err(NetError::DimensionMismatch { expected: self.stats.mean.len(), got: x.len() }.into());
        }
        let mut z = vec![0.0; x.len()];
        self.stats.apply(x, &mut z);
        self.inner.predict_row(&z)
    }

    fn predict_all(&self, data: &Dataset) -> Result<Vec<f64>, BenchError> {
        self.inner.predict_all(&self.stats.transform(data))
    }
}
