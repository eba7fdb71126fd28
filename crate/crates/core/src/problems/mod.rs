//! Benchmark problems `f = g ∘ h` with reference optima for regret.

mod environmental;
mod gp_generated;
mod langermann;
mod rosenbrock;

use std::fmt;
use std::sync::Arc;

use crate::acquisition::OuterFunction;
use crate::domain::BoxDomain;
use crate::error::{Error, Result};

pub use environmental::{concentration, environmental, ENV_TRUTH};
pub use gp_generated::{gp_generated, gp_sample_1d, GpProblemKind};
pub use langermann::langermann;
pub use rosenbrock::rosenbrock;

pub type InnerFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Names accepted by [`by_name`].
pub const PROBLEM_NAMES: [&str; 5] = ["langermann", "rosenbrock5", "environmental", "gp1", "gp2"];

/// Instance seed used for the GP-generated problems in the catalog.
pub const CATALOG_GP_SEED: u64 = 1;

#[derive(Clone)]
pub struct CompositeProblem {
    pub name: String,
    pub domain: BoxDomain,
    m: usize,
    inner: InnerFn,
    outer: Arc<dyn OuterFunction>,
    /// Global maximum of `f` over the domain, when known.
    pub f_max_true: Option<f64>,
    /// A maximizer of `f`, when known.
    pub x_ref: Option<Vec<f64>>,
}

impl fmt::Debug for CompositeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompositeProblem")
            .field("name", &self.name)
            .field("d", &self.d())
            .field("m", &self.m)
            .field("f_max_true", &self.f_max_true)
            .field("x_ref", &self.x_ref)
            .finish()
    }
}

impl CompositeProblem {
    pub fn new(
        name: impl Into<String>,
        domain: BoxDomain,
        m: usize,
        inner: InnerFn,
        outer: Arc<dyn OuterFunction>,
    ) -> Self {
        assert_eq!(outer.dim(), m, "outer function dimension mismatch");
        Self {
            name: name.into(),
            domain,
            m,
            inner,
            outer,
            f_max_true: None,
            x_ref: None,
        }
    }

    pub fn with_optimum(mut self, f_max_true: f64, x_ref: Option<Vec<f64>>) -> Self {
        self.f_max_true = Some(f_max_true);
        self.x_ref = x_ref;
        self
    }

    pub fn d(&self) -> usize {
        self.domain.dim()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h(&self, x: &[f64]) -> Vec<f64> {
        (self.inner)(x)
    }

    pub fn g(&self) -> &dyn OuterFunction {
        self.outer.as_ref()
    }

    pub fn outer(&self) -> Arc<dyn OuterFunction> {
        Arc::clone(&self.outer)
    }

    pub fn f(&self, x: &[f64]) -> f64 {
        self.outer.eval(&self.h(x))
    }

    /// Simple regret `f_max_true − f(x)`.
    pub fn regret(&self, x: &[f64]) -> Result<f64> {
        let f_max = self.f_max_true.ok_or(Error::MissingOptimum)?;
        Ok(f_max - self.f(x))
    }
}

/// Looks a problem up by catalog name.
pub fn by_name(name: &str) -> Option<CompositeProblem> {
    match name {
        "langermann" => Some(langermann()),
        "rosenbrock5" | "rosenbrock" => Some(rosenbrock()),
        "environmental" => Some(environmental()),
        "gp1" => Some(gp_generated(GpProblemKind::Type1, CATALOG_GP_SEED)),
        "gp2" => Some(gp_generated(GpProblemKind::Type2, CATALOG_GP_SEED)),
        _ => None,
    }
}

/// Dense-sample-then-polish search for the maximum of `f` over `domain`:
/// the best `keep` of `candidates` are refined by small-step CMA-ES runs.
pub fn polish_maximum<F>(
    f: F,
    domain: &BoxDomain,
    candidates: impl Iterator<Item = Vec<f64>>,
    keep: usize,
) -> (f64, Vec<f64>)
where
    F: Fn(&[f64]) -> f64,
{
    use crate::acqopt::cmaes::{cmaes_maximize, CmaesConfig};
    let mut top: Vec<(f64, Vec<f64>)> = Vec::with_capacity(keep + 1);
    for x in candidates {
        let v = f(&x);
        if top.len() < keep || v > top[top.len() - 1].0 {
            let pos = top.partition_point(|(tv, _)| *tv >= v);
            top.insert(pos, (v, x));
            top.truncate(keep);
        }
    }
    let mut best = top[0].clone();
    for (i, (_, x)) in top.iter().enumerate() {
        for sigma in [0.02, 0.002] {
            let cfg = CmaesConfig {
                initial_sigma: sigma,
                generations: 400,
                ..CmaesConfig::for_dim(domain.dim(), i as u64)
            };
            let r = cmaes_maximize(&f, domain, &cfg, Some(x));
            if r.value > best.0 {
                best = (r.value, r.x);
            }
        }
    }
    best
}
