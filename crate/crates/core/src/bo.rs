//! The outer optimization loop for all six methods.
//!
//! `*_cf` methods observe the full vector `h(x)` and model it with an
//! independent-output GP; the classical methods observe only `f(x)` and model
//! it with a single-output GP. Everything maximizes; minimization problems are
//! expressed by negating `g`.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::acqopt::{
    cmaes_maximize, maximize_ei_cf, propose_random, CmaesConfig, SgaConfig, MIN_SEPARATION,
};
use crate::acquisition::{
    ei_closed_form, ensemble_average, pi_cf_saa, posterior_mean_f, Incumbent, Linear,
    OuterFunction,
};
use crate::domain::{max_abs_diff, BoxDomain};
use crate::error::{Error, Result};
use crate::gp::{FitMode, HyperPriors, HyperSet, MultiOutputGPModel, DUPLICATE_TOLERANCE};
use crate::noise::NoiseStream;
use crate::problems::CompositeProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    EiCf,
    PiCf,
    RandomCf,
    Ei,
    Pi,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    MultiOutputOnH,
    SingleOutputOnF,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::EiCf,
        Method::PiCf,
        Method::RandomCf,
        Method::Ei,
        Method::Pi,
        Method::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::EiCf => "ei_cf",
            Method::PiCf => "pi_cf",
            Method::RandomCf => "random_cf",
            Method::Ei => "ei",
            Method::Pi => "pi",
            Method::Random => "random",
        }
    }

    pub fn model_kind(self) -> ModelKind {
        match self {
            Method::EiCf | Method::PiCf | Method::RandomCf => ModelKind::MultiOutputOnH,
            Method::Ei | Method::Pi | Method::Random => ModelKind::SingleOutputOnF,
        }
    }

    pub fn is_composite(self) -> bool {
        self.model_kind() == ModelKind::MultiOutputOnH
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method '{s}'")))
    }
}

/// Settings of the loop; defaults follow the experimental protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoConfig {
    /// Hyperparameter samples averaged over by every acquisition.
    pub ensemble_size: usize,
    pub sga: SgaConfig,
    /// Improvement threshold δ of PI and PI-CF.
    pub pi_delta: f64,
    /// Fixed draws of the PI/PI-CF sample-average objective.
    pub pi_samples: usize,
    /// CMA-ES restarts for classical EI.
    pub ei_restarts: usize,
    /// Monte Carlo draws for the posterior mean of `f` in recommendations.
    pub recommend_samples: usize,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            ensemble_size: 10,
            sga: SgaConfig::default(),
            pi_delta: 0.01,
            pi_samples: 50,
            ei_restarts: 10,
            recommend_samples: 4096,
        }
    }
}

/// `2(d+1)` pairwise-distinct uniform points.
pub fn initial_design(domain: &BoxDomain, noise: &mut NoiseStream) -> Vec<Vec<f64>> {
    let count = 2 * (domain.dim() + 1);
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(count);
    while pts.len() < count {
        let x = propose_random(domain, noise);
        if pts.iter().all(|p| max_abs_diff(p, &x) > DUPLICATE_TOLERANCE) {
            pts.push(x);
        }
    }
    pts
}

/// Evaluation history plus the model fitted to it.
#[derive(Debug, Clone)]
pub struct BoState {
    pub method: Method,
    pub xs: Vec<Vec<f64>>,
    /// Observed `h(x)`; empty for classical methods.
    pub hs: Vec<Vec<f64>>,
    pub fs: Vec<f64>,
    pub incumbent: Incumbent,
    /// Number of times the inner function was queried through this state.
    pub h_evaluations: usize,
    model: MultiOutputGPModel,
    iteration: usize,
    stream: NoiseStream,
}

impl BoState {
    /// Evaluates `design` and fits the first model.
    pub fn new(
        problem: &CompositeProblem,
        method: Method,
        design: &[Vec<f64>],
        seed: u64,
        cfg: &BoConfig,
    ) -> Result<Self> {
        if design.is_empty() {
            return Err(Error::InvalidArgument("empty initial design".into()));
        }
        let stream = NoiseStream::new(seed).labeled(method.name());
        let mut xs = Vec::with_capacity(design.len());
        let mut hs = Vec::new();
        let mut fs = Vec::with_capacity(design.len());
        let mut h_evaluations = 0;
        for x in design {
            let (h, f) = observe(problem, method, x);
            h_evaluations += 1;
            xs.push(x.clone());
            hs.extend(h);
            fs.push(f);
        }
        let incumbent = Incumbent::from_history(&xs, &fs).expect("non-empty history");
        let model = fit_model(problem, method, &xs, &hs, &fs, cfg, &stream, 0)?;
        Ok(Self {
            method,
            xs,
            hs,
            fs,
            incumbent,
            h_evaluations,
            model,
            iteration: 0,
            stream,
        })
    }

    pub fn model(&self) -> &MultiOutputGPModel {
        &self.model
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// The function the model's outputs are scalarized with: `g` for
    /// composite methods, the identity otherwise.
    pub fn outer<'a>(&self, problem: &'a CompositeProblem) -> OuterRef<'a> {
        if self.method.is_composite() {
            OuterRef::Composite(problem.g())
        } else {
            OuterRef::Identity(Linear::identity())
        }
    }
}

/// Borrowed or owned outer function.
pub enum OuterRef<'a> {
    Composite(&'a dyn OuterFunction),
    Identity(Linear),
}

impl OuterFunction for OuterRef<'_> {
    fn dim(&self) -> usize {
        match self {
            OuterRef::Composite(g) => g.dim(),
            OuterRef::Identity(l) => l.dim(),
        }
    }

    fn eval(&self, y: &[f64]) -> f64 {
        match self {
            OuterRef::Composite(g) => g.eval(y),
            OuterRef::Identity(l) => l.eval(y),
        }
    }

    fn grad(&self, y: &[f64]) -> Vec<f64> {
        match self {
            OuterRef::Composite(g) => g.grad(y),
            OuterRef::Identity(l) => l.grad(y),
        }
    }
}

fn observe(problem: &CompositeProblem, method: Method, x: &[f64]) -> (Option<Vec<f64>>, f64) {
    if method.is_composite() {
        let h = problem.h(x);
        let f = problem.g().eval(&h);
        (Some(h), f)
    } else {
        (None, problem.f(x))
    }
}

#[allow(clippy::too_many_arguments)]
fn fit_model(
    problem: &CompositeProblem,
    method: Method,
    xs: &[Vec<f64>],
    hs: &[Vec<f64>],
    fs: &[f64],
    cfg: &BoConfig,
    stream: &NoiseStream,
    iteration: usize,
) -> Result<MultiOutputGPModel> {
    let targets: Vec<Vec<f64>> = if method.is_composite() {
        hs.to_vec()
    } else {
        fs.iter().map(|f| vec![*f]).collect()
    };
    let priors = HyperPriors::weakly_informative(&problem.domain, &targets);
    let seed = stream.substream(iteration as u64).labeled("fit").seed();
    MultiOutputGPModel::fit(
        xs.to_vec(),
        targets,
        FitMode::Ensemble {
            count: cfg.ensemble_size,
            seed,
        },
        &priors,
    )
}

fn too_close(xs: &[Vec<f64>], x: &[f64]) -> bool {
    xs.iter()
        .any(|p| max_abs_diff(p, x) <= MIN_SEPARATION)
}

/// Classical expected improvement of a single-output model, averaged over
/// the hyperparameter ensemble.
pub fn expected_improvement(model: &MultiOutputGPModel, f_star: f64, x: &[f64]) -> f64 {
    let values: Vec<f64> = (0..model.ensemble_size())
        .map(|e| {
            let (mu, var) = model.mean_and_variance(x, e);
            ei_closed_form(mu[0] - f_star, var[0].sqrt())
        })
        .collect();
    ensemble_average(&values)
}

/// Acquisition proposal for the next evaluation under the current model.
pub fn propose(state: &BoState, problem: &CompositeProblem, cfg: &BoConfig) -> Result<Vec<f64>> {
    let domain = &problem.domain;
    let mut stream = state
        .stream
        .substream(state.iteration as u64 + 1)
        .labeled("propose");
    let g = state.outer(problem);
    let model = &state.model;
    let members = model.ensemble_size();
    let f_star = state.incumbent.f_star;

    let proposal = match state.method {
        Method::Random | Method::RandomCf => return Ok(propose_random(domain, &mut stream)),
        Method::EiCf => {
            let sga = SgaConfig {
                seed: stream.next_u64(),
                ..cfg.sga.clone()
            };
            match maximize_ei_cf(model, &g, &state.incumbent, domain, &sga) {
                Ok(x) => x,
                Err(Error::AllDegenerate) => {
                    log::warn!("EI-CF maximization degenerate; proposing a random point");
                    return Ok(propose_random(domain, &mut stream));
                }
                Err(e) => return Err(e),
            }
        }
        Method::PiCf | Method::Pi => {
            let draws = stream.normal_draws(cfg.pi_samples, model.output_dim());
            let objective = |x: &[f64]| {
                (0..members)
                    .map(|e| {
                        pi_cf_saa(&model.posterior(x, e), &g, f_star, cfg.pi_delta, &draws)
                            .unwrap_or(0.0)
                    })
                    .sum::<f64>()
                    / members as f64
            };
            let cmaes = CmaesConfig::for_dim(domain.dim(), stream.next_u64());
            cmaes_maximize(objective, domain, &cmaes, None).x
        }
        Method::Ei => {
            let objective = |x: &[f64]| expected_improvement(model, f_star, x);
            let mut best: Option<(f64, Vec<f64>)> = None;
            for _ in 0..cfg.ei_restarts.max(1) {
                let cmaes = CmaesConfig::for_dim(domain.dim(), stream.next_u64());
                let r = cmaes_maximize(objective, domain, &cmaes, None);
                if !too_close(&state.xs, &r.x) && best.as_ref().is_none_or(|(v, _)| r.value > *v) {
                    best = Some((r.value, r.x));
                }
            }
            match best {
                Some((_, x)) => x,
                None => propose_random(domain, &mut stream),
            }
        }
    };
    if too_close(&state.xs, &proposal) {
        log::warn!("{} proposal coincides with an evaluated point; proposing a random point", state.method);
        return Ok(propose_random(domain, &mut stream));
    }
    Ok(proposal)
}

/// One iteration: propose, evaluate `h` (or `f`), refit.
pub fn bo_step(state: &mut BoState, problem: &CompositeProblem, cfg: &BoConfig) -> Result<()> {
    let x = propose(state, problem, cfg)?;
    let (h, f) = observe(problem, state.method, &x);
    state.h_evaluations += 1;
    state.xs.push(x.clone());
    state.hs.extend(h);
    state.fs.push(f);
    if f > state.incumbent.f_star {
        state.incumbent = Incumbent { f_star: f, x_star: x };
    }
    state.iteration += 1;
    state.model = fit_model(
        problem,
        state.method,
        &state.xs,
        &state.hs,
        &state.fs,
        cfg,
        &state.stream,
        state.iteration,
    )?;
    Ok(())
}

// The recommendation search starts at the best evaluated point, so it uses a
// smaller initial step and stops at optimizer tolerance 1e-7 (unit cube).
const RECOMMEND_SIGMA: f64 = 0.1;
const RECOMMEND_TOL_X: f64 = 1e-7;
const RECOMMEND_TOL_FUN: f64 = 1e-10;

/// Point with the largest ensemble-averaged posterior mean of `f`.
///
/// Composite methods use the Monte Carlo mean of `g(h(x))` over one shared
/// batch of draws; classical methods use the GP mean on `f`. CMA-ES starts
/// from the best evaluated point, and evaluated points stay candidates (they
/// win ties).
pub fn recommend(state: &BoState, problem: &CompositeProblem, cfg: &BoConfig) -> Result<Vec<f64>> {
    let model = &state.model;
    let members = model.ensemble_size();
    let mut stream = state
        .stream
        .substream(state.iteration as u64)
        .labeled("recommend");
    let g = state.outer(problem);
    let draws = stream.normal_draws(cfg.recommend_samples.max(1), model.output_dim());
    let composite = state.method.is_composite();
    let objective = |x: &[f64]| -> f64 {
        let total: f64 = (0..members)
            .map(|e| {
                if composite {
                    posterior_mean_f(&model.posterior(x, e), &g, &draws)
                        .map_or(f64::NEG_INFINITY, |est| est.value)
                } else {
                    model.mean(x, e)[0]
                }
            })
            .sum();
        total / members as f64
    };

    let mut best_eval: Option<(f64, usize)> = None;
    for (i, x) in state.xs.iter().enumerate() {
        let v = objective(x);
        if best_eval.is_none_or(|(b, _)| v > b) {
            best_eval = Some((v, i));
        }
    }
    let (eval_value, eval_index) = best_eval.expect("state holds evaluations");
    let cmaes = CmaesConfig {
        initial_sigma: RECOMMEND_SIGMA,
        tol_x: RECOMMEND_TOL_X,
        tol_fun: RECOMMEND_TOL_FUN,
        ..CmaesConfig::for_dim(problem.d(), stream.next_u64())
    };
    let r = cmaes_maximize(objective, &problem.domain, &cmaes, Some(&state.xs[eval_index]));
    let tie = 1e-12 * (1.0 + eval_value.abs());
    if r.value > eval_value + tie {
        Ok(r.x)
    } else {
        Ok(state.xs[eval_index].clone())
    }
}

/// Per-iteration record of a run. Iteration 0 is the state right after the
/// initial design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub x: Option<Vec<f64>>,
    pub h: Option<Vec<f64>>,
    pub f: Option<f64>,
    pub incumbent_f: f64,
    pub x_rec: Vec<f64>,
    pub f_rec: f64,
    pub regret: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub method: Method,
    pub problem: String,
    pub seed: u64,
    pub budget: usize,
    pub config: BoConfig,
    pub initial_design: Vec<Vec<f64>>,
    pub records: Vec<IterationRecord>,
    pub h_evaluations: usize,
    /// Hyperparameters of the final model.
    pub final_hyperparams: Vec<HyperSet>,
}

impl RunTrace {
    pub fn final_record(&self) -> &IterationRecord {
        self.records.last().expect("trace has at least one record")
    }
}

/// Full run: initial design, `budget` iterations, recommendation after each.
///
/// The initial design depends only on `(seed, problem)`, so methods run with
/// the same seed share it.
pub fn run(
    problem: &CompositeProblem,
    method: Method,
    budget: usize,
    seed: u64,
    cfg: &BoConfig,
) -> Result<RunTrace> {
    let f_max = problem.f_max_true.ok_or(Error::MissingOptimum)?;
    let root = NoiseStream::new(seed);
    let design = initial_design(&problem.domain, &mut root.labeled("design"));
    let started = Instant::now();
    let mut state = BoState::new(problem, method, &design, seed, cfg)?;
    let mut records = Vec::with_capacity(budget + 1);

    let record = |state: &BoState, x: Option<Vec<f64>>, started: Instant| -> Result<IterationRecord> {
        let x_rec = recommend(state, problem, cfg)?;
        let f_rec = problem.f(&x_rec);
        let h = x.as_ref().filter(|_| method.is_composite()).map(|_| {
            state.hs.last().cloned().expect("composite state stores h")
        });
        Ok(IterationRecord {
            iteration: state.iteration,
            f: x.as_ref().map(|_| *state.fs.last().expect("non-empty")),
            x,
            h,
            incumbent_f: state.incumbent.f_star,
            regret: f_max - f_rec,
            x_rec,
            f_rec,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        })
    };

    records.push(record(&state, None, started)?);
    for _ in 0..budget {
        let t0 = Instant::now();
        bo_step(&mut state, problem, cfg)?;
        let x = state.xs.last().cloned();
        records.push(record(&state, x, t0)?);
    }
    Ok(RunTrace {
        method,
        problem: problem.name.clone(),
        seed,
        budget,
        config: cfg.clone(),
        initial_design: design,
        records,
        h_evaluations: state.h_evaluations,
        final_hyperparams: state.model.hyperparams(),
    })
}

#[cfg(test)]
mod tests;
