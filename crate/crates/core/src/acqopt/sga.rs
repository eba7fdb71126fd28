//! Multi-start projected stochastic gradient ascent on EI-CF.

use serde::{Deserialize, Serialize};

use crate::acquisition::{ei_cf_mc, ei_cf_value_and_grad, Incumbent, OuterFunction};
use crate::domain::{max_abs_diff, BoxDomain};
use crate::error::{Error, Result};
use crate::gp::MultiOutputGPModel;
use crate::noise::NoiseStream;

/// Candidates closer than this to an evaluated point are rejected.
pub const MIN_SEPARATION: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgaConfig {
    pub restarts: usize,
    pub steps_per_restart: usize,
    pub grad_samples_per_step: usize,
    /// Base step `a0` as a fraction of the domain width.
    pub step_size: f64,
    /// Decay exponent α of `a_t = a0 / t^α`.
    pub step_decay: f64,
    pub final_ranking_samples: usize,
    pub seed: u64,
}

impl Default for SgaConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            steps_per_restart: 100,
            grad_samples_per_step: 128,
            step_size: 0.2,
            step_decay: 0.7,
            final_ranking_samples: 4096,
            seed: 0,
        }
    }
}

impl SgaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0
            || self.grad_samples_per_step == 0
            || self.final_ranking_samples == 0
            || !(self.step_size > 0.0)
            || !(self.step_decay > 0.5 && self.step_decay <= 1.0)
        {
            return Err(Error::InvalidArgument(format!("invalid SGA settings: {self:?}")));
        }
        Ok(())
    }
}

/// Maximizes the ensemble-averaged EI-CF by stochastic gradient ascent from
/// `cfg.restarts` starts and returns the best candidate.
///
/// Restart 0 starts next to the incumbent (1% of the domain width away); the
/// others start uniformly at random. Each step averages
/// `grad_samples_per_step` gradient samples per ensemble member, rescales by a
/// running RMS of the gradient norm and moves `a_t = a0 / t^α` domain widths
/// before projecting back onto the box. Each chain contributes its final
/// iterate and the visited iterate with the highest step estimate; these are
/// ranked by `ei_cf_mc` over one shared batch of `final_ranking_samples` draws.
pub fn maximize_ei_cf<G: OuterFunction + ?Sized>(
    model: &MultiOutputGPModel,
    g: &G,
    incumbent: &Incumbent,
    domain: &BoxDomain,
    cfg: &SgaConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let root = NoiseStream::new(cfg.seed);
    let mut candidates: Vec<Vec<f64>> = Vec::with_capacity(2 * cfg.restarts);
    for r in 0..cfg.restarts {
        let (last, best) = run_chain(model, g, incumbent, domain, cfg, r, root.substream(r as u64))?;
        let distinct = best != last;
        candidates.push(last);
        if distinct {
            candidates.push(best);
        }
    }

    let draws = root
        .labeled("ranking")
        .normal_draws(cfg.final_ranking_samples, model.output_dim());
    let mut best: Option<(f64, usize)> = None;
    for (r, x) in candidates.iter().enumerate() {
        if model
            .train_x()
            .iter()
            .any(|t| max_abs_diff(t, x) <= MIN_SEPARATION)
        {
            continue;
        }
        let mut total = 0.0;
        for e in 0..model.ensemble_size() {
            total += ei_cf_mc(&model.posterior(x, e), g, incumbent.f_star, &draws)?.value;
        }
        let value = total / model.ensemble_size() as f64;
        if best.is_none_or(|(v, _)| value > v) {
            best = Some((value, r));
        }
    }
    match best {
        Some((_, r)) => Ok(candidates[r].clone()),
        None => Err(Error::AllDegenerate),
    }
}

/// Returns the final iterate and the visited iterate with the highest
/// EI-CF estimate.
fn run_chain<G: OuterFunction + ?Sized>(
    model: &MultiOutputGPModel,
    g: &G,
    incumbent: &Incumbent,
    domain: &BoxDomain,
    cfg: &SgaConfig,
    restart: usize,
    mut rng: NoiseStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let widths = domain.widths();
    let mut x = if restart == 0 && incumbent.x_star.len() == domain.dim() {
        let perturbed: Vec<f64> = incumbent
            .x_star
            .iter()
            .zip(&widths)
            .map(|(v, w)| v + 0.01 * w * (2.0 * rng.uniform() - 1.0))
            .collect();
        domain.project(&perturbed)
    } else {
        rng.uniform_in(domain)
    };
    let members = model.ensemble_size() as f64;
    let mut sq_norm_avg: Option<f64> = None;
    let mut best: Option<(f64, Vec<f64>)> = None;

    for t in 1..=cfg.steps_per_restart {
        let draws = rng.normal_draws(cfg.grad_samples_per_step, model.output_dim());
        let mut value = 0.0;
        let mut grad = vec![0.0; domain.dim()];
        let mut degenerate = false;
        for e in 0..model.ensemble_size() {
            let post = match model.posterior_with_gradients(&x, e) {
                Ok(p) => p,
                Err(Error::DegeneratePoint { .. }) => {
                    degenerate = true;
                    break;
                }
                Err(err) => return Err(err),
            };
            let (est, gr) = ei_cf_value_and_grad(&post, g, incumbent.f_star, &draws)?;
            value += est.value / members;
            for (a, b) in grad.iter_mut().zip(&gr) {
                *a += b / members;
            }
        }
        if degenerate {
            x = rng.uniform_in(domain);
            sq_norm_avg = None;
            continue;
        }
        if best.as_ref().is_none_or(|(v, _)| value > *v) {
            best = Some((value, x.clone()));
        }

        // scale each coordinate by its domain width before measuring the norm
        let sq_norm: f64 = grad.iter().zip(&widths).map(|(g, w)| (g * w).powi(2)).sum();
        if sq_norm == 0.0 || !sq_norm.is_finite() {
            continue;
        }
        let avg = match sq_norm_avg {
            Some(a) => 0.9 * a + 0.1 * sq_norm,
            None => sq_norm,
        };
        sq_norm_avg = Some(avg);
        let a_t = cfg.step_size / (t as f64).powf(cfg.step_decay);
        let scale = a_t / avg.sqrt();
        for k in 0..x.len() {
            x[k] += scale * widths[k] * widths[k] * grad[k];
        }
        domain.project_in_place(&mut x);
    }
    let best = best.map_or_else(|| x.clone(), |(_, b)| b);
    Ok((x, best))
}
