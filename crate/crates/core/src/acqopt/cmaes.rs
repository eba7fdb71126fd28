//! (μ/μ_w, λ)-CMA-ES on a box, run in unit-cube coordinates.
//!
//! Candidates falling outside the box are repaired by clamping, and the
//! repaired points enter the distribution update. The run returns the best
//! point ever evaluated.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::domain::BoxDomain;
use crate::noise::NoiseStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmaesConfig {
    /// Population size λ.
    pub population: usize,
    /// Generation cap.
    pub generations: usize,
    /// Initial step size as a fraction of the domain width.
    pub initial_sigma: f64,
    /// Stop once the search distribution's largest standard deviation, in
    /// unit-cube coordinates, falls below this.
    pub tol_x: f64,
    /// Stop once the best and worst values over recent generations agree to
    /// this relative tolerance.
    pub tol_fun: f64,
    pub seed: u64,
}

impl CmaesConfig {
    /// λ = 4 + ⌊3 ln d⌋, 100·d generations, σ₀ = 0.25.
    pub fn for_dim(d: usize, seed: u64) -> Self {
        Self {
            population: 4 + (3.0 * (d.max(1) as f64).ln()).floor() as usize,
            generations: 100 * d.max(1),
            initial_sigma: 0.25,
            tol_x: 1e-11,
            tol_fun: 1e-12,
            seed,
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.population < 4 || !(self.initial_sigma > 0.0 && self.initial_sigma <= 0.5) {
            return Err(crate::Error::InvalidArgument(format!(
                "invalid CMA-ES settings: λ={}, σ₀={}",
                self.population, self.initial_sigma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmaesResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub generations: usize,
}

/// Maximizes a (possibly piecewise-constant) objective over `domain` from a
/// uniform random start drawn from `cfg.seed`.
pub fn maximize_saa<F>(objective: F, domain: &BoxDomain, cfg: &CmaesConfig) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    cmaes_maximize(objective, domain, cfg, None).x
}

/// Runs CMA-ES from `start` (or a uniform random point) and returns the best
/// evaluated point. Non-finite objective values rank below every finite one.
pub fn cmaes_maximize<F>(
    mut objective: F,
    domain: &BoxDomain,
    cfg: &CmaesConfig,
    start: Option<&[f64]>,
) -> CmaesResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = domain.dim();
    let nf = n as f64;
    let lambda = cfg.population.max(2);
    let mu = lambda / 2;
    let mut rng = NoiseStream::new(cfg.seed);

    let raw: Vec<f64> = (0..mu)
        .map(|i| (mu as f64 + 0.5).ln() - ((i + 1) as f64).ln())
        .collect();
    let wsum: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / wsum).collect();
    let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

    let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
    let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
    let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
    let c_1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
    let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
    let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

    let mut mean = match start {
        Some(s) => DVector::from_vec(domain.to_unit(&domain.project(s))),
        None => DVector::from_fn(n, |_, _| rng.uniform()),
    };
    let mut sigma = cfg.initial_sigma;
    let mut cov = DMatrix::<f64>::identity(n, n);
    let mut p_sigma = DVector::<f64>::zeros(n);
    let mut p_c = DVector::<f64>::zeros(n);

    let mut eval = |u: &DVector<f64>| -> f64 {
        let v = objective(&domain.from_unit(u.as_slice()));
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };

    let mut best_u = mean.clone();
    let mut best_value = eval(&mean);
    let mut evaluations = 1;
    let mut history: Vec<f64> = Vec::new();
    let mut generation = 0;

    while generation < cfg.generations {
        generation += 1;
        let eig = SymmetricEigen::new(cov.clone());
        let d_diag = eig.eigenvalues.map(|v| v.max(1e-20).sqrt());
        let b = eig.eigenvectors;

        let mut pop: Vec<(DVector<f64>, DVector<f64>, f64)> = Vec::with_capacity(lambda);
        for _ in 0..lambda {
            let z = DVector::from_fn(n, |_, _| rng.normal());
            let y = &b * z.component_mul(&d_diag);
            let mut x = &mean + sigma * &y;
            for v in x.iter_mut() {
                *v = v.clamp(0.0, 1.0);
            }
            let y = (&x - &mean) / sigma;
            let f = eval(&x);
            evaluations += 1;
            pop.push((x, y, f));
        }
        // stable: ties keep sampling order
        pop.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap_or(std::cmp::Ordering::Equal));
        if pop[0].2 > best_value {
            best_value = pop[0].2;
            best_u = pop[0].0.clone();
        }

        let y_w = pop
            .iter()
            .take(mu)
            .zip(&weights)
            .fold(DVector::zeros(n), |acc, ((_, y, _), w)| acc + *w * y);
        mean += sigma * &y_w;

        // C^{-1/2} y_w
        let inv_sqrt = &b * DMatrix::from_diagonal(&d_diag.map(|v| 1.0 / v)) * b.transpose();
        p_sigma = (1.0 - c_sigma) * &p_sigma
            + (c_sigma * (2.0 - c_sigma) * mu_eff).sqrt() * (&inv_sqrt * &y_w);
        let ps_norm = p_sigma.norm();
        let h_sigma = ps_norm / (1.0 - (1.0 - c_sigma).powi(2 * generation as i32)).sqrt()
            < (1.4 + 2.0 / (nf + 1.0)) * chi_n;
        let h = if h_sigma { 1.0 } else { 0.0 };
        p_c = (1.0 - c_c) * &p_c + h * (c_c * (2.0 - c_c) * mu_eff).sqrt() * &y_w;

        let mut rank_mu = DMatrix::<f64>::zeros(n, n);
        for ((_, y, _), w) in pop.iter().take(mu).zip(&weights) {
            rank_mu += *w * y * y.transpose();
        }
        cov = (1.0 - c_1 - c_mu) * &cov
            + c_1 * (&p_c * p_c.transpose() + (1.0 - h) * c_c * (2.0 - c_c) * &cov)
            + c_mu * rank_mu;
        cov = 0.5 * (&cov + cov.transpose());

        sigma *= ((c_sigma / d_sigma) * (ps_norm / chi_n - 1.0)).exp();
        sigma = sigma.min(1.0);

        // stopping: tiny search distribution, or flat fitness over recent generations
        let max_sd = sigma * d_diag.max();
        if max_sd < cfg.tol_x {
            break;
        }
        history.push(pop[0].2);
        let window = 10 + (30.0 * nf / lambda as f64).ceil() as usize;
        if history.len() >= window {
            let recent = &history[history.len() - window..];
            let hi = recent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = recent.iter().copied().fold(f64::INFINITY, f64::min);
            let gen_range = pop[0].2 - pop[lambda - 1].2;
            let tol = cfg.tol_fun * (1.0 + hi.abs());
            if hi.is_finite() && lo.is_finite() && hi - lo <= tol && gen_range <= tol {
                break;
            }
        }
    }

    CmaesResult {
        x: domain.project(&domain.from_unit(best_u.as_slice())),
        value: best_value,
        evaluations,
        generations: generation,
    }
}
