//! Inner-loop maximizers for acquisition functions.

pub mod cmaes;
mod sga;

pub use cmaes::{cmaes_maximize, maximize_saa, CmaesConfig, CmaesResult};
pub use sga::{maximize_ei_cf, SgaConfig, MIN_SEPARATION};

use crate::domain::BoxDomain;
use crate::noise::NoiseStream;

/// Uniform proposal over the box.
pub fn propose_random(domain: &BoxDomain, noise: &mut NoiseStream) -> Vec<f64> {
    noise.uniform_in(domain)
}
