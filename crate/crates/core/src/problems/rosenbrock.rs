use std::sync::Arc;

use super::CompositeProblem;
use crate::acquisition::OuterFunction;
use crate::domain::BoxDomain;

struct RosenbrockOuter;

impl OuterFunction for RosenbrockOuter {
    fn dim(&self) -> usize {
        8
    }

    fn eval(&self, y: &[f64]) -> f64 {
        -(0..4)
            .map(|j| 100.0 * y[j] * y[j] + (y[j + 4] - 1.0).powi(2))
            .sum::<f64>()
    }

    fn grad(&self, y: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; 8];
        for j in 0..4 {
            g[j] = -200.0 * y[j];
            g[j + 4] = -2.0 * (y[j + 4] - 1.0);
        }
        g
    }
}

fn inner(x: &[f64]) -> Vec<f64> {
    let mut h = Vec::with_capacity(8);
    h.extend((0..4).map(|j| x[j + 1] - x[j] * x[j]));
    h.extend_from_slice(&x[..4]);
    h
}

/// Negated five-dimensional Rosenbrock function on `[-2.048, 2.048]^5`, split
/// into `h_j = x_{j+1} - x_j²`, `h_{j+4} = x_j`.
pub fn rosenbrock() -> CompositeProblem {
    CompositeProblem::new(
        "rosenbrock5",
        BoxDomain::cube(5, -2.048, 2.048).unwrap(),
        8,
        Arc::new(inner),
        Arc::new(RosenbrockOuter),
    )
    .with_optimum(0.0, Some(vec![1.0; 5]))
}
