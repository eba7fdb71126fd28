//! Problems whose inner function is a smooth proxy of a GP sample path.
//!
//! Each output draws a zero-mean, unit-variance ARD squared-exponential GP on a
//! 512-point Latin hypercube and is defined as the posterior mean given those
//! values, which makes `h` cheap, smooth and deterministic.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{polish_maximum, CompositeProblem};
use crate::acquisition::{Linear, OuterFunction};
use crate::domain::BoxDomain;
use crate::gp::{KernelHyperparams, MultiOutputGPModel};
use crate::noise::NoiseStream;

const DESIGN_POINTS: usize = 512;
const SCREEN_POINTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GpProblemKind {
    /// `[0,1]^4`, `m = 5`, `g(y) = -‖y − y_obs‖²`.
    Type1,
    /// `[0,1]^3`, `m = 4`, `g(y) = -Σ exp(y_j)`.
    Type2,
}

struct NegSquaredDistance {
    target: Vec<f64>,
}

impl OuterFunction for NegSquaredDistance {
    fn dim(&self) -> usize {
        self.target.len()
    }

    fn eval(&self, y: &[f64]) -> f64 {
        -y.iter()
            .zip(&self.target)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
    }

    fn grad(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.target).map(|(a, b)| -2.0 * (a - b)).collect()
    }
}

struct NegSumExp {
    m: usize,
}

impl OuterFunction for NegSumExp {
    fn dim(&self) -> usize {
        self.m
    }

    fn eval(&self, y: &[f64]) -> f64 {
        -y.iter().map(|v| v.exp()).sum::<f64>()
    }

    fn grad(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| -v.exp()).collect()
    }
}

fn latin_hypercube(n: usize, d: usize, rng: &mut NoiseStream) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; d]; n];
    for k in 0..d {
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = (rng.uniform() * (i + 1) as f64) as usize;
            perm.swap(i, j.min(i));
        }
        for (i, p) in pts.iter_mut().enumerate() {
            p[k] = (perm[i] as f64 + rng.uniform()) / n as f64;
        }
    }
    pts
}

/// Builds a GP-generated instance. The same `(kind, instance_seed)` always
/// yields the same problem.
pub fn gp_generated(kind: GpProblemKind, instance_seed: u64) -> CompositeProblem {
    let (d, m, name) = match kind {
        GpProblemKind::Type1 => (4, 5, "gp1"),
        GpProblemKind::Type2 => (3, 4, "gp2"),
    };
    let domain = BoxDomain::cube(d, 0.0, 1.0).unwrap();
    let root = NoiseStream::new(instance_seed).labeled(name);
    let design = latin_hypercube(DESIGN_POINTS, d, &mut root.labeled("design"));

    let mut hypers = Vec::with_capacity(m);
    let mut values = vec![vec![0.0; m]; DESIGN_POINTS];
    for j in 0..m {
        let mut rng = root.substream(j as u64);
        let lengthscales: Vec<f64> = (0..d)
            .map(|_| (0.1f64.ln() + rng.uniform() * (0.5f64.ln() - 0.1f64.ln())).exp())
            .collect();
        let mut hyp = KernelHyperparams::new(0.0, 1.0, lengthscales);
        let (path, jitter) = sample_path(&design, &hyp, &mut rng);
        // the proxy smooths with the same jitter the path was drawn with
        hyp.jitter = jitter;
        for (row, v) in values.iter_mut().zip(path) {
            row[j] = v;
        }
        hypers.push(hyp);
    }
    let surrogate = MultiOutputGPModel::with_hyperparams(d, design, values, vec![hypers])
        .expect("GP-generated instance has a valid design");
    let surrogate = Arc::new(surrogate);
    let inner = {
        let s = Arc::clone(&surrogate);
        Arc::new(move |x: &[f64]| s.mean(x, 0))
    };

    match kind {
        GpProblemKind::Type1 => {
            let mut rng = root.labeled("target");
            let x_star = rng.uniform_in(&domain);
            let target = inner(&x_star);
            CompositeProblem::new(name, domain, m, inner, Arc::new(NegSquaredDistance { target }))
                .with_optimum(0.0, Some(x_star))
        }
        GpProblemKind::Type2 => {
            let outer = NegSumExp { m };
            let f = |x: &[f64]| outer.eval(&inner(x));
            let mut rng = root.labeled("screen");
            let candidates = (0..SCREEN_POINTS).map(|_| rng.uniform_in(&domain));
            let (f_max, x_ref) = polish_maximum(f, &domain, candidates, 10);
            CompositeProblem::new(name, domain, m, inner, Arc::new(outer))
                .with_optimum(f_max, Some(x_ref))
        }
    }
}

/// One-dimensional instance with `g` the identity: `f` is the smoothed draw
/// of a unit-variance GP with lengthscale 0.1 on a 64-point grid over `[0,1]`.
pub fn gp_sample_1d(instance_seed: u64) -> CompositeProblem {
    let domain = BoxDomain::cube(1, 0.0, 1.0).unwrap();
    let mut rng = NoiseStream::new(instance_seed).labeled("gp_1d");
    let grid: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64 / 63.0]).collect();
    let mut hyp = KernelHyperparams::new(0.0, 1.0, vec![0.1]);
    let (path, jitter) = sample_path(&grid, &hyp, &mut rng);
    hyp.jitter = jitter;
    let values = path.into_iter().map(|v| vec![v]).collect();
    let surrogate = Arc::new(
        MultiOutputGPModel::with_hyperparams(1, grid, values, vec![vec![hyp]])
            .expect("grid has no duplicates"),
    );
    let inner = {
        let s = Arc::clone(&surrogate);
        Arc::new(move |x: &[f64]| s.mean(x, 0))
    };
    let f = |x: &[f64]| inner(x)[0];
    let candidates = (0..=SCREEN_POINTS).map(|i| vec![i as f64 / SCREEN_POINTS as f64]);
    let (f_max, x_ref) = polish_maximum(f, &domain, candidates, 5);
    CompositeProblem::new("gp_1d", domain, 1, inner, Arc::new(Linear::identity()))
        .with_optimum(f_max, Some(x_ref))
}

/// Draw of the GP at `points`, with the smallest jitter that factorizes.
fn sample_path(points: &[Vec<f64>], hyp: &KernelHyperparams, rng: &mut NoiseStream) -> (Vec<f64>, f64) {
    let n = points.len();
    let mut k = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for l in 0..=i {
            let v = hyp.covariance(&points[i], &points[l]);
            k[(i, l)] = v;
            k[(l, i)] = v;
        }
    }
    let mut jitter = 1e-10;
    loop {
        let mut kj = k.clone();
        for i in 0..n {
            kj[(i, i)] += jitter;
        }
        if let Some(ch) = nalgebra::Cholesky::new(kj) {
            let z = nalgebra::DVector::from_fn(n, |_, _| rng.normal());
            return ((ch.l() * z).iter().copied().collect(), jitter);
        }
        jitter *= 10.0;
        assert!(jitter <= 1e-4, "GP sample covariance is not positive definite");
    }
}
