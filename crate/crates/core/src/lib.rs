//! Bayesian optimization of composite objectives `f(x) = g(h(x))`.
//!
//! The expensive vector-valued inner function `h` is modeled with an
//! independent-output Gaussian process; the cheap outer function `g` is known.
//! The expected improvement under the implied (non-Gaussian) posterior on `f`
//! is estimated by Monte Carlo through the reparameterization
//! `h(x) = μ(x) + C(x) Z`, and maximized with stochastic gradient ascent on an
//! unbiased pathwise gradient estimator.
//!
//! Modules:
//! - [`gp`]: multi-output GP regression, hyperparameter fitting, posterior derivatives.
//! - [`acquisition`]: EI-CF, PI-CF, closed-form EI and the posterior mean of `f`.
//! - [`acqopt`]: stochastic gradient ascent, CMA-ES and random proposals.
//! - [`bo`]: the optimization loop, recommendations and run traces.
//! - [`problems`]: benchmark problems with reference optima.

pub mod acqopt;
pub mod acquisition;
pub mod bo;
pub mod domain;
pub mod error;
pub mod gp;
pub mod noise;
pub mod normal;
pub mod problems;

pub use domain::BoxDomain;
pub use error::{Error, Result};
