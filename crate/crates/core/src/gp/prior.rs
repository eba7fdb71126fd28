//! Weakly informative hyperparameter priors.
//!
//! Hyperparameters are handled in the unconstrained vector
//! `θ = [constant_mean, ln signal_variance, ln ℓ_1, …, ln ℓ_d]`.
//! The log-variance and log-lengthscales carry normal priors (log-normal in the
//! natural scale), the constant mean a normal prior.

use serde::{Deserialize, Serialize};

use super::kernel::KernelHyperparams;
use crate::domain::BoxDomain;

/// Prior standard deviation of `ln signal_variance`.
pub const LOG_VARIANCE_SCALE: f64 = 1.5;
/// Prior standard deviation of each `ln ℓ_k`.
pub const LOG_LENGTHSCALE_SCALE: f64 = 1.0;
/// Hyperparameters are confined to `loc ± BOUND_SCALES · scale`.
pub const BOUND_SCALES: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputPrior {
    pub mean_loc: f64,
    pub mean_scale: f64,
    pub log_variance_loc: f64,
    pub log_variance_scale: f64,
    pub log_lengthscale_loc: Vec<f64>,
    pub log_lengthscale_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperPriors {
    pub outputs: Vec<OutputPrior>,
}

impl HyperPriors {
    /// Priors centred on the data: signal-variance median equal to the sample
    /// variance of each output, lengthscale median a quarter of the domain width,
    /// constant mean centred at the sample mean.
    pub fn weakly_informative(domain: &BoxDomain, train_h: &[Vec<f64>]) -> Self {
        let m = train_h.first().map_or(0, Vec::len);
        let outputs = (0..m)
            .map(|j| {
                let column: Vec<f64> = train_h.iter().map(|h| h[j]).collect();
                OutputPrior::from_data(domain, &column)
            })
            .collect();
        Self { outputs }
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }
}

impl OutputPrior {
    pub fn from_data(domain: &BoxDomain, y: &[f64]) -> Self {
        let n = y.len().max(1) as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let scale_floor = mean.abs().max(1.0);
        let var = if var > 1e-12 * scale_floor * scale_floor {
            var
        } else {
            scale_floor * scale_floor
        };
        Self {
            mean_loc: mean,
            mean_scale: var.sqrt(),
            log_variance_loc: var.ln(),
            log_variance_scale: LOG_VARIANCE_SCALE,
            log_lengthscale_loc: domain.widths().iter().map(|w| (w / 4.0).ln()).collect(),
            log_lengthscale_scale: LOG_LENGTHSCALE_SCALE,
        }
    }

    pub fn dim(&self) -> usize {
        self.log_lengthscale_loc.len() + 2
    }

    /// Prior median as a θ vector.
    pub fn median(&self) -> Vec<f64> {
        let mut theta = vec![self.mean_loc, self.log_variance_loc];
        theta.extend_from_slice(&self.log_lengthscale_loc);
        theta
    }

    /// Per-coordinate prior scales of θ.
    pub fn scales(&self) -> Vec<f64> {
        let mut s = vec![self.mean_scale, self.log_variance_scale];
        s.extend(std::iter::repeat_n(
            self.log_lengthscale_scale,
            self.log_lengthscale_loc.len(),
        ));
        s
    }

    /// Box `median ± BOUND_SCALES·scale` that confines θ.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let med = self.median();
        let sc = self.scales();
        let lo = med.iter().zip(&sc).map(|(m, s)| m - BOUND_SCALES * s).collect();
        let hi = med.iter().zip(&sc).map(|(m, s)| m + BOUND_SCALES * s).collect();
        (lo, hi)
    }

    /// Log prior density of θ up to an additive constant; `-inf` outside the bounds.
    pub fn log_density(&self, theta: &[f64]) -> f64 {
        let med = self.median();
        let sc = self.scales();
        let mut lp = 0.0;
        for ((t, m), s) in theta.iter().zip(&med).zip(&sc) {
            let z = (t - m) / s;
            if z.abs() > BOUND_SCALES {
                return f64::NEG_INFINITY;
            }
            lp -= 0.5 * z * z;
        }
        lp
    }
}

pub fn theta_to_hyperparams(theta: &[f64]) -> KernelHyperparams {
    KernelHyperparams::new(
        theta[0],
        theta[1].exp(),
        theta[2..].iter().map(|t| t.exp()).collect(),
    )
}

pub fn hyperparams_to_theta(h: &KernelHyperparams) -> Vec<f64> {
    let mut theta = vec![h.constant_mean, h.signal_variance.ln()];
    theta.extend(h.lengthscales.iter().map(|l| l.ln()));
    theta
}
