//! Calibration of a two-spill pollutant diffusion model.

use std::f64::consts::PI;
use std::sync::Arc;

use super::CompositeProblem;
use crate::acquisition::OuterFunction;
use crate::domain::BoxDomain;

/// True parameters `(M, D, L, τ)`.
pub const ENV_TRUTH: [f64; 4] = [10.0, 0.07, 1.505, 30.1525];
const LOCATIONS: [f64; 3] = [0.0, 1.0, 2.5];
const TIMES: [f64; 4] = [15.0, 30.0, 45.0, 60.0];

/// Concentration at location `s` and time `t` for spill mass `mass`, diffusion
/// rate `diffusion`, second-spill location `location` and time `tau`. The
/// second spill contributes only for `t > τ`.
pub fn concentration(s: f64, t: f64, mass: f64, diffusion: f64, location: f64, tau: f64) -> f64 {
    let first = mass / (4.0 * PI * diffusion * t).sqrt() * (-s * s / (4.0 * diffusion * t)).exp();
    let second = if t > tau {
        let dt = t - tau;
        mass / (4.0 * PI * diffusion * dt).sqrt()
            * (-(s - location).powi(2) / (4.0 * diffusion * dt)).exp()
    } else {
        0.0
    };
    first + second
}

fn inner(x: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(LOCATIONS.len() * TIMES.len());
    for s in LOCATIONS {
        for t in TIMES {
            out.push(concentration(s, t, x[0], x[1], x[2], x[3]));
        }
    }
    out
}

struct SumOfSquaresOuter {
    observed: Vec<f64>,
}

impl OuterFunction for SumOfSquaresOuter {
    fn dim(&self) -> usize {
        self.observed.len()
    }

    fn eval(&self, y: &[f64]) -> f64 {
        -y.iter()
            .zip(&self.observed)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
    }

    fn grad(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(&self.observed)
            .map(|(a, b)| -2.0 * (a - b))
            .collect()
    }
}

/// Environmental model calibration: `h` is the 3×4 grid of concentrations
/// (location-major), `g` the negated sum of squared errors against the grid at
/// [`ENV_TRUTH`].
pub fn environmental() -> CompositeProblem {
    let domain = BoxDomain::new(vec![7.0, 0.02, 0.01, 30.01], vec![13.0, 0.12, 3.0, 30.295]).unwrap();
    let observed = inner(&ENV_TRUTH);
    CompositeProblem::new(
        "environmental",
        domain,
        observed.len(),
        Arc::new(inner),
        Arc::new(SumOfSquaresOuter { observed }),
    )
    .with_optimum(0.0, Some(ENV_TRUTH.to_vec()))
}
