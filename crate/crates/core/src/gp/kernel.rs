use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters of one output: constant mean plus ARD squared-exponential covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelHyperparams {
    pub constant_mean: f64,
    pub signal_variance: f64,
    pub lengthscales: Vec<f64>,
    /// Diagonal jitter added to the training kernel matrix. Filled in at fit time.
    pub jitter: f64,
}

/// Smallest jitter tried, relative to the signal variance.
pub const JITTER_START: f64 = 1e-10;
/// Largest jitter tolerated, relative to the signal variance.
pub const JITTER_MAX: f64 = 1e-4;

impl KernelHyperparams {
    pub fn new(constant_mean: f64, signal_variance: f64, lengthscales: Vec<f64>) -> Self {
        Self {
            constant_mean,
            signal_variance,
            lengthscales,
            jitter: 0.0,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.lengthscales.len() != d {
            return Err(Error::InvalidArgument(format!(
                "expected {d} lengthscales, got {}",
                self.lengthscales.len()
            )));
        }
        if !(self.signal_variance > 0.0 && self.signal_variance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "signal variance must be positive, got {}",
                self.signal_variance
            )));
        }
        if !self.lengthscales.iter().all(|l| *l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidArgument(
                "lengthscales must be positive and finite".into(),
            ));
        }
        if !self.constant_mean.is_finite() {
            return Err(Error::InvalidArgument("constant mean must be finite".into()));
        }
        if !(self.jitter >= 0.0 && self.jitter <= JITTER_MAX * self.signal_variance * (1.0 + 1e-12))
        {
            return Err(Error::InvalidArgument(format!(
                "jitter {} outside [0, {:e}·signal_variance]",
                self.jitter, JITTER_MAX
            )));
        }
        Ok(())
    }

    pub fn inverse_sq_lengthscales(&self) -> Vec<f64> {
        self.lengthscales.iter().map(|l| 1.0 / (l * l)).collect()
    }

    pub fn covariance(&self, a: &[f64], b: &[f64]) -> f64 {
        se_kernel(self.signal_variance, &self.inverse_sq_lengthscales(), a, b)
    }
}

/// `s · exp(-½ Σ_k (a_k - b_k)² / ℓ_k²)`, with `inv_ls2[k] = 1/ℓ_k²`.
#[inline]
pub fn se_kernel(signal_variance: f64, inv_ls2: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut r2 = 0.0;
    for k in 0..inv_ls2.len() {
        let diff = a[k] - b[k];
        r2 += diff * diff * inv_ls2[k];
    }
    signal_variance * (-0.5 * r2).exp()
}
