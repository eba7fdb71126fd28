//! Independent-output Gaussian-process regression on noise-free data.
//!
//! Each of the `m` outputs of `h` gets its own constant-mean, ARD
//! squared-exponential GP. A fitted model holds an ensemble of hyperparameter
//! sets (one set = `m` per-output hyperparameters) together with the Cholesky
//! factor and solved weights for every (member, output) pair, so a posterior
//! query costs `O(m n²)`.

mod factor;
pub mod kernel;
pub mod posterior;
pub mod prior;
pub mod slice;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::acqopt::cmaes::{cmaes_maximize, CmaesConfig};
use crate::domain::{max_abs_diff, BoxDomain};
use crate::error::{Error, Result};
use crate::noise::NoiseStream;
use factor::{back_solve_in_place, forward_solve, Evidence, OutputFactor, TrainingGeometry};
pub use kernel::{se_kernel, KernelHyperparams, JITTER_MAX, JITTER_START};
pub use posterior::GaussianPosterior;
pub use prior::{HyperPriors, OutputPrior};
use prior::{hyperparams_to_theta, theta_to_hyperparams};
use slice::{slice_sample, SliceSchedule};

/// Two inputs closer than this in the ∞-norm count as duplicates.
pub const DUPLICATE_TOLERANCE: f64 = 1e-12;
/// Relative variance below which posterior derivatives are not reported.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// One hyperparameter set: per-output hyperparameters.
pub type HyperSet = Vec<KernelHyperparams>;

/// How hyperparameters are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitMode {
    /// Single maximum-a-posteriori set.
    Map,
    /// `count` draws from the hyperparameter posterior by slice sampling.
    Ensemble { count: usize, seed: u64 },
}

#[derive(Debug, Clone)]
pub struct MultiOutputGPModel {
    d: usize,
    m: usize,
    train_x: Vec<Vec<f64>>,
    train_h: Vec<Vec<f64>>,
    /// `members[e][j]` is output `j` under hyperparameter set `e`.
    members: Vec<Vec<OutputFactor>>,
}

impl MultiOutputGPModel {
    /// Builds a model from fixed hyperparameters. `train_x` may be empty, in
    /// which case the model is the prior.
    pub fn with_hyperparams(
        d: usize,
        train_x: Vec<Vec<f64>>,
        train_h: Vec<Vec<f64>>,
        ensemble: Vec<HyperSet>,
    ) -> Result<Self> {
        if ensemble.is_empty() {
            return Err(Error::InvalidArgument("empty hyperparameter ensemble".into()));
        }
        let m = ensemble[0].len();
        check_data(d, m, &train_x, &train_h)?;
        let geom = TrainingGeometry::new(&train_x, d);
        let columns = columns(&train_h, m);
        let mut members = Vec::with_capacity(ensemble.len());
        for set in &ensemble {
            if set.len() != m {
                return Err(Error::InvalidArgument(
                    "hyperparameter sets disagree on the number of outputs".into(),
                ));
            }
            let mut outputs = Vec::with_capacity(m);
            for (j, hyp) in set.iter().enumerate() {
                hyp.validate(d)?;
                outputs.push(OutputFactor::new(&geom, &columns[j], hyp)?);
            }
            members.push(outputs);
        }
        Ok(Self {
            d,
            m,
            train_x,
            train_h,
            members,
        })
    }

    /// Estimates hyperparameters for every output and builds the model.
    pub fn fit(
        train_x: Vec<Vec<f64>>,
        train_h: Vec<Vec<f64>>,
        mode: FitMode,
        priors: &HyperPriors,
    ) -> Result<Self> {
        if train_x.is_empty() {
            return Err(Error::InvalidArgument("fit needs at least one observation".into()));
        }
        let d = train_x[0].len();
        let m = priors.num_outputs();
        check_data(d, m, &train_x, &train_h)?;
        let geom = TrainingGeometry::new(&train_x, d);
        let columns = columns(&train_h, m);

        let per_output: Vec<Vec<KernelHyperparams>> = match mode {
            FitMode::Map => (0..m)
                .map(|j| Ok(vec![map_estimate(&geom, &columns[j], &priors.outputs[j])?]))
                .collect::<Result<_>>()?,
            FitMode::Ensemble { count, seed } => {
                if count == 0 {
                    return Err(Error::InvalidArgument("ensemble count must be ≥ 1".into()));
                }
                let root = NoiseStream::new(seed);
                (0..m)
                    .map(|j| {
                        let mut rng = root.substream(j as u64);
                        sample_hyperparams(&geom, &columns[j], &priors.outputs[j], count, &mut rng)
                    })
                    .collect::<Result<_>>()?
            }
        };

        let count = per_output.first().map_or(0, Vec::len);
        let mut members = Vec::with_capacity(count);
        for e in 0..count {
            let mut outputs = Vec::with_capacity(m);
            for j in 0..m {
                outputs.push(OutputFactor::new(&geom, &columns[j], &per_output[j][e])?);
            }
            members.push(outputs);
        }
        Ok(Self {
            d,
            m,
            train_x,
            train_h,
            members,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn output_dim(&self) -> usize {
        self.m
    }

    pub fn num_train(&self) -> usize {
        self.train_x.len()
    }

    pub fn train_x(&self) -> &[Vec<f64>] {
        &self.train_x
    }

    pub fn train_h(&self) -> &[Vec<f64>] {
        &self.train_h
    }

    pub fn ensemble_size(&self) -> usize {
        self.members.len()
    }

    /// Hyperparameters (with the jitter actually used) of every member.
    pub fn hyperparams(&self) -> Vec<HyperSet> {
        self.members
            .iter()
            .map(|outs| outs.iter().map(|f| f.hyp.clone()).collect())
            .collect()
    }

    /// Posterior mean at `x` for one member; cheaper than the full posterior.
    pub fn mean(&self, x: &[f64], member: usize) -> Vec<f64> {
        let mut kvec = vec![0.0; self.train_x.len()];
        self.members[member]
            .iter()
            .map(|f| {
                self.cross_covariance(f, x, &mut kvec);
                f.hyp.constant_mean + dot(&kvec, &f.alpha)
            })
            .collect()
    }

    /// Posterior mean and per-output variance at `x` for one member.
    pub fn mean_and_variance(&self, x: &[f64], member: usize) -> (Vec<f64>, Vec<f64>) {
        let outputs = &self.members[member];
        let n = self.train_x.len();
        let mut kvec = vec![0.0; n];
        let mut mean = Vec::with_capacity(self.m);
        let mut var = Vec::with_capacity(self.m);
        for f in outputs {
            self.cross_covariance(f, x, &mut kvec);
            mean.push(f.hyp.constant_mean + dot(&kvec, &f.alpha));
            let v = forward_solve(&f.chol, n, &kvec);
            var.push((f.hyp.signal_variance - dot(&v, &v)).max(0.0));
        }
        (mean, var)
    }

    /// Posterior `(μ_n(x), K_n(x), C_n(x))` under hyperparameter set `member`.
    pub fn posterior(&self, x: &[f64], member: usize) -> GaussianPosterior {
        let (mean, var) = self.mean_and_variance(x, member);
        GaussianPosterior::diagonal(mean, &var)
    }

    /// Posterior with the Jacobian of the mean and the derivative of the
    /// Cholesky factor. Fails with [`Error::DegeneratePoint`] where some output
    /// variance is below `VARIANCE_FLOOR · signal_variance`.
    pub fn posterior_with_gradients(&self, x: &[f64], member: usize) -> Result<GaussianPosterior> {
        let outputs = &self.members[member];
        let (n, d, m) = (self.train_x.len(), self.d, self.m);
        let mut kvec = vec![0.0; n];
        let mut mean = Vec::with_capacity(m);
        let mut var = Vec::with_capacity(m);
        let mut d_mean = DMatrix::<f64>::zeros(m, d);
        let mut d_chol = vec![DMatrix::<f64>::zeros(m, m); d];
        for (j, f) in outputs.iter().enumerate() {
            self.cross_covariance(f, x, &mut kvec);
            mean.push(f.hyp.constant_mean + dot(&kvec, &f.alpha));
            let mut w = forward_solve(&f.chol, n, &kvec);
            let v = (f.hyp.signal_variance - dot(&w, &w)).max(0.0);
            if v < VARIANCE_FLOOR * f.hyp.signal_variance {
                return Err(Error::DegeneratePoint {
                    output: j,
                    variance: v,
                });
            }
            var.push(v);
            back_solve_in_place(&f.chol, n, &mut w);
            let sd = v.sqrt();
            for k in 0..d {
                // ∂k(x, x_i)/∂x_k = -k(x, x_i)(x_k - x_ik)/ℓ_k²
                let mut dm = 0.0;
                let mut dv = 0.0;
                for i in 0..n {
                    let dk = -kvec[i] * (x[k] - self.train_x[i][k]) * f.inv_ls2[k];
                    dm += dk * f.alpha[i];
                    dv += dk * w[i];
                }
                d_mean[(j, k)] = dm;
                d_chol[k][(j, j)] = -2.0 * dv / (2.0 * sd);
            }
        }
        Ok(GaussianPosterior::diagonal(mean, &var).with_gradients(d_mean, d_chol))
    }

    fn cross_covariance(&self, f: &OutputFactor, x: &[f64], out: &mut [f64]) {
        for (o, xi) in out.iter_mut().zip(&self.train_x) {
            *o = se_kernel(f.hyp.signal_variance, &f.inv_ls2, x, xi);
        }
    }
}

/// Log marginal likelihood of output `output`'s data under `hyp`.
pub fn log_marginal_likelihood(
    hyp: &KernelHyperparams,
    train_x: &[Vec<f64>],
    train_h: &[Vec<f64>],
    output: usize,
) -> Result<f64> {
    let d = hyp.lengthscales.len();
    hyp.validate(d)?;
    let geom = TrainingGeometry::new(train_x, d);
    let y: Vec<f64> = train_h.iter().map(|h| h[output]).collect();
    let f = OutputFactor::new(&geom, &y, hyp)?;
    Ok(f.log_marginal_likelihood())
}

/// Unnormalized log posterior of one output's hyperparameters
/// `θ = [c, ln s, ln ℓ…]`. The covariance part is cached, so moving only the
/// constant mean costs `O(1)`.
struct LogPosterior<'a> {
    geom: &'a TrainingGeometry,
    y: &'a [f64],
    prior: &'a OutputPrior,
    cached: Option<(Vec<f64>, Option<Evidence>)>,
}

impl<'a> LogPosterior<'a> {
    fn new(geom: &'a TrainingGeometry, y: &'a [f64], prior: &'a OutputPrior) -> Self {
        Self {
            geom,
            y,
            prior,
            cached: None,
        }
    }

    fn eval(&mut self, theta: &[f64]) -> f64 {
        let lp = self.prior.log_density(theta);
        if !lp.is_finite() {
            return f64::NEG_INFINITY;
        }
        let stale = self.cached.as_ref().is_none_or(|(key, _)| key[..] != theta[1..]);
        if stale {
            let ev = Evidence::new(self.geom, self.y, &theta_to_hyperparams(theta)).ok();
            self.cached = Some((theta[1..].to_vec(), ev));
        }
        match self.cached.as_ref().and_then(|(_, ev)| ev.as_ref()) {
            Some(ev) => {
                let ll = ev.log_marginal_likelihood(theta[0]);
                if ll.is_finite() {
                    ll + lp
                } else {
                    f64::NEG_INFINITY
                }
            }
            None => f64::NEG_INFINITY,
        }
    }
}

fn map_estimate(geom: &TrainingGeometry, y: &[f64], prior: &OutputPrior) -> Result<KernelHyperparams> {
    let (lo, hi) = prior.bounds();
    let bounds = BoxDomain::new(lo, hi)?;
    let start = prior.median();
    let cfg = CmaesConfig {
        initial_sigma: 0.1,
        ..CmaesConfig::for_dim(start.len(), 0)
    };
    let mut post = LogPosterior::new(geom, y, prior);
    let objective = |theta: &[f64]| {
        let v = post.eval(theta);
        if v.is_finite() {
            v
        } else {
            -1e300
        }
    };
    let best = cmaes_maximize(objective, &bounds, &cfg, Some(&start));
    let theta = if best.value > LogPosterior::new(geom, y, prior).eval(&start) {
        best.x
    } else {
        start
    };
    Ok(theta_to_hyperparams(&theta))
}

fn sample_hyperparams(
    geom: &TrainingGeometry,
    y: &[f64],
    prior: &OutputPrior,
    count: usize,
    rng: &mut NoiseStream,
) -> Result<Vec<KernelHyperparams>> {
    let start = prior.median();
    if !LogPosterior::new(geom, y, prior).eval(&start).is_finite() {
        // prior median unusable (e.g. extremely ill-conditioned data): fall back
        // to the MAP point as the chain's starting state
        let map = map_estimate(geom, y, prior)?;
        let theta = hyperparams_to_theta(&map);
        if !LogPosterior::new(geom, y, prior).eval(&theta).is_finite() {
            return Err(Error::NonPositiveDefinite {
                jitter: JITTER_MAX * map.signal_variance,
            });
        }
        return sample_from(geom, y, prior, &theta, count, rng);
    }
    sample_from(geom, y, prior, &start, count, rng)
}

fn sample_from(
    geom: &TrainingGeometry,
    y: &[f64],
    prior: &OutputPrior,
    start: &[f64],
    count: usize,
    rng: &mut NoiseStream,
) -> Result<Vec<KernelHyperparams>> {
    let schedule = SliceSchedule {
        count,
        ..SliceSchedule::default()
    };
    let mut post = LogPosterior::new(geom, y, prior);
    let draws = slice_sample(
        |theta: &[f64]| post.eval(theta),
        start,
        &prior.scales(),
        schedule,
        rng,
    );
    Ok(draws.iter().map(|t| theta_to_hyperparams(t)).collect())
}

fn check_data(d: usize, m: usize, train_x: &[Vec<f64>], train_h: &[Vec<f64>]) -> Result<()> {
    if train_x.len() != train_h.len() {
        return Err(Error::InvalidArgument(format!(
            "{} inputs but {} outputs",
            train_x.len(),
            train_h.len()
        )));
    }
    for (x, h) in train_x.iter().zip(train_h) {
        if x.len() != d || h.len() != m {
            return Err(Error::InvalidArgument("inconsistent data dimensions".into()));
        }
        if !x.iter().chain(h).all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite training data".into()));
        }
    }
    for i in 0..train_x.len() {
        for l in 0..i {
            if max_abs_diff(&train_x[i], &train_x[l]) <= DUPLICATE_TOLERANCE {
                return Err(Error::DuplicatePoint { first: l, second: i });
            }
        }
    }
    Ok(())
}

fn columns(train_h: &[Vec<f64>], m: usize) -> Vec<Vec<f64>> {
    (0..m)
        .map(|j| train_h.iter().map(|h| h[j]).collect())
        .collect()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
