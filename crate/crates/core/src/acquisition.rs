//! Acquisition functions for composite objectives `f(x) = g(h(x))`.
//!
//! With `h(x) | data ~ N(μ, K)` and `C` the lower Cholesky factor of `K`, every
//! quantity below is an expectation over `h(x) = μ + C Z`, `Z ~ N(0, I_m)`,
//! estimated from an explicit batch of normal draws so that results are pure
//! functions of their inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::GaussianPosterior;
use crate::noise::NormalDraws;
use crate::normal;

/// The cheap outer function `g: R^m → R`.
pub trait OuterFunction: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, y: &[f64]) -> f64;

    /// `∇g(y)`. Defaults to central differences.
    fn grad(&self, y: &[f64]) -> Vec<f64> {
        central_difference_grad(|v| self.eval(v), y)
    }
}

/// Central differences with step `1e-6 · max(1, |y_j|)`.
pub fn central_difference_grad<F: Fn(&[f64]) -> f64>(g: F, y: &[f64]) -> Vec<f64> {
    let mut probe = y.to_vec();
    (0..y.len())
        .map(|j| {
            let step = 1e-6 * y[j].abs().max(1.0);
            probe[j] = y[j] + step;
            let up = g(&probe);
            probe[j] = y[j] - step;
            let down = g(&probe);
            probe[j] = y[j];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// `g(y) = wᵀ y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weights: Vec<f64>,
}

impl Linear {
    pub fn new(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    /// Scalar identity, `g(y) = y`.
    pub fn identity() -> Self {
        Self::new(vec![1.0])
    }
}

impl OuterFunction for Linear {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn eval(&self, y: &[f64]) -> f64 {
        self.weights.iter().zip(y).map(|(w, v)| w * v).sum()
    }

    fn grad(&self, _y: &[f64]) -> Vec<f64> {
        self.weights.clone()
    }
}

/// Outer function from closures; without a gradient closure it falls back to
/// central differences.
pub struct FnOuter<F, G = fn(&[f64]) -> Vec<f64>> {
    m: usize,
    eval: F,
    grad: Option<G>,
}

impl<F> FnOuter<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    pub fn new(m: usize, eval: F) -> Self {
        Self { m, eval, grad: None }
    }
}

impl<F, G> FnOuter<F, G>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    pub fn with_grad(m: usize, eval: F, grad: G) -> Self {
        Self {
            m,
            eval,
            grad: Some(grad),
        }
    }
}

impl<F, G> OuterFunction for FnOuter<F, G>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.m
    }

    fn eval(&self, y: &[f64]) -> f64 {
        (self.eval)(y)
    }

    fn grad(&self, y: &[f64]) -> Vec<f64> {
        match &self.grad {
            Some(g) => g(y),
            None => central_difference_grad(|v| (self.eval)(v), y),
        }
    }
}

/// Best observed composite value and where it was observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Incumbent {
    pub f_star: f64,
    pub x_star: Vec<f64>,
}

impl Incumbent {
    /// Incumbent of an evaluation history (first maximizer wins ties).
    pub fn from_history(xs: &[Vec<f64>], fs: &[f64]) -> Option<Self> {
        let mut best: Option<usize> = None;
        for (i, f) in fs.iter().enumerate() {
            if best.is_none_or(|b| *f > fs[b]) {
                best = Some(i);
            }
        }
        best.map(|i| Self {
            f_star: fs[i],
            x_star: xs[i].clone(),
        })
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples_used: usize,
}

impl McEstimate {
    fn from_samples(sum: f64, sum_sq: f64, count: usize) -> Self {
        let l = count as f64;
        let mean = sum / l;
        let var = if count > 1 {
            ((sum_sq - l * mean * mean) / (l - 1.0)).max(0.0)
        } else {
            0.0
        };
        Self {
            value: mean,
            std_error: (var / l).sqrt(),
            samples_used: count,
        }
    }
}

fn check_draws(post: &GaussianPosterior, draws: &NormalDraws) -> Result<()> {
    if draws.is_empty() {
        return Err(Error::InvalidArgument("need at least one Monte Carlo draw".into()));
    }
    if draws.dim() != post.dim() {
        return Err(Error::InvalidArgument(format!(
            "draws have dimension {} but the posterior has {}",
            draws.dim(),
            post.dim()
        )));
    }
    Ok(())
}

/// Monte Carlo EI-CF: `(1/L) Σ_ℓ {g(μ + C Z_ℓ) − f*}⁺`.
pub fn ei_cf_mc<G: OuterFunction + ?Sized>(
    post: &GaussianPosterior,
    g: &G,
    f_star: f64,
    draws: &NormalDraws,
) -> Result<McEstimate> {
    check_draws(post, draws)?;
    let mut y = vec![0.0; post.dim()];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for z in draws.rows() {
        post.reparameterize(z, &mut y);
        let gv = g.eval(&y);
        if gv.is_nan() {
            return Err(Error::OuterFunction);
        }
        let imp = (gv - f_star).max(0.0);
        sum += imp;
        sum_sq += imp * imp;
    }
    Ok(McEstimate::from_samples(sum, sum_sq, draws.len()))
}

/// One draw of the unbiased EI-CF gradient estimator: zero when
/// `g(μ + C z) ≤ f*`, otherwise `(∂μ/∂x + ∂C/∂x · z)ᵀ ∇g(μ + C z)`.
pub fn ei_cf_grad_sample<G: OuterFunction + ?Sized>(
    post: &GaussianPosterior,
    g: &G,
    f_star: f64,
    z: &[f64],
) -> Result<Vec<f64>> {
    let d = gradient_dim(post)?;
    let mut y = vec![0.0; post.dim()];
    let mut out = vec![0.0; d];
    post.reparameterize(z, &mut y);
    let gv = g.eval(&y);
    if gv.is_nan() {
        return Err(Error::OuterFunction);
    }
    if gv > f_star {
        post.pathwise_gradient(z, &g.grad(&y), &mut out);
    }
    Ok(out)
}

/// EI-CF estimate and the mean of the gradient samples over the same draws.
pub fn ei_cf_value_and_grad<G: OuterFunction + ?Sized>(
    post: &GaussianPosterior,
    g: &G,
    f_star: f64,
    draws: &NormalDraws,
) -> Result<(McEstimate, Vec<f64>)> {
    check_draws(post, draws)?;
    let d = gradient_dim(post)?;
    let mut y = vec![0.0; post.dim()];
    let mut gamma = vec![0.0; d];
    let mut grad = vec![0.0; d];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for z in draws.rows() {
        post.reparameterize(z, &mut y);
        let gv = g.eval(&y);
        if gv.is_nan() {
            return Err(Error::OuterFunction);
        }
        if gv > f_star {
            let imp = gv - f_star;
            sum += imp;
            sum_sq += imp * imp;
            post.pathwise_gradient(z, &g.grad(&y), &mut gamma);
            for (a, b) in grad.iter_mut().zip(&gamma) {
                *a += b;
            }
        }
    }
    let l = draws.len() as f64;
    grad.iter_mut().for_each(|v| *v /= l);
    Ok((McEstimate::from_samples(sum, sum_sq, draws.len()), grad))
}

fn gradient_dim(post: &GaussianPosterior) -> Result<usize> {
    match (&post.d_mean, &post.d_chol) {
        (Some(dm), Some(_)) => Ok(dm.ncols()),
        _ => Err(Error::InvalidArgument(
            "posterior was computed without gradients".into(),
        )),
    }
}

/// Closed-form expected improvement `Δ Φ(Δ/σ) + σ φ(Δ/σ)`; `Δ⁺` when `σ = 0`.
pub fn ei_closed_form(delta: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return delta.max(0.0);
    }
    let u = delta / sigma;
    (delta * normal::cdf(u) + sigma * normal::pdf(u)).max(0.0)
}

/// Sample-average PI-CF: the fraction of the fixed draws with
/// `g(μ + C Z_ℓ) ≥ f* + δ`.
pub fn pi_cf_saa<G: OuterFunction + ?Sized>(
    post: &GaussianPosterior,
    g: &G,
    f_star: f64,
    delta: f64,
    draws: &NormalDraws,
) -> Result<f64> {
    check_draws(post, draws)?;
    let threshold = f_star + delta;
    let mut y = vec![0.0; post.dim()];
    let hits = draws
        .rows()
        .filter(|z| {
            post.reparameterize(z, &mut y);
            g.eval(&y) >= threshold
        })
        .count();
    Ok(hits as f64 / draws.len() as f64)
}

/// Monte Carlo posterior mean of `f(x) = g(h(x))`.
pub fn posterior_mean_f<G: OuterFunction + ?Sized>(
    post: &GaussianPosterior,
    g: &G,
    draws: &NormalDraws,
) -> Result<McEstimate> {
    check_draws(post, draws)?;
    let mut y = vec![0.0; post.dim()];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for z in draws.rows() {
        post.reparameterize(z, &mut y);
        let gv = g.eval(&y);
        if gv.is_nan() {
            return Err(Error::OuterFunction);
        }
        sum += gv;
        sum_sq += gv * gv;
    }
    Ok(McEstimate::from_samples(sum, sum_sq, draws.len()))
}

/// Arithmetic mean of per-member acquisition values. Uses a running mean,
/// which returns equal inputs unchanged.
pub fn ensemble_average(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "ensemble_average needs at least one member");
    let mut mean = 0.0;
    for (k, v) in values.iter().enumerate() {
        mean += (v - mean) / (k + 1) as f64;
    }
    mean
}

/// Coordinatewise mean of per-member gradient vectors.
pub fn ensemble_average_vectors(vectors: &[Vec<f64>]) -> Vec<f64> {
    assert!(!vectors.is_empty(), "ensemble_average needs at least one member");
    let mut out = vec![0.0; vectors[0].len()];
    for (k, v) in vectors.iter().enumerate() {
        for (o, x) in out.iter_mut().zip(v) {
            *o += (x - *o) / (k + 1) as f64;
        }
    }
    out
}
