use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use super::{polish_maximum, CompositeProblem};
use crate::acquisition::OuterFunction;
use crate::domain::BoxDomain;

const A: [[f64; 5]; 2] = [[3.0, 5.0, 2.0, 1.0, 7.0], [5.0, 2.0, 1.0, 4.0, 9.0]];
const C: [f64; 5] = [1.0, 2.0, 5.0, 2.0, 3.0];
const GRID: usize = 2000;

struct LangermannOuter;

impl OuterFunction for LangermannOuter {
    fn dim(&self) -> usize {
        5
    }

    fn eval(&self, y: &[f64]) -> f64 {
        -y.iter()
            .zip(C)
            .map(|(v, c)| c * (-v / PI).exp() * (PI * v).cos())
            .sum::<f64>()
    }

    fn grad(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(C)
            .map(|(v, c)| c * (-v / PI).exp() * ((PI * v).cos() / PI + PI * (PI * v).sin()))
            .collect()
    }
}

fn inner(x: &[f64]) -> Vec<f64> {
    (0..5)
        .map(|j| (0..2).map(|i| (x[i] - A[i][j]).powi(2)).sum())
        .collect()
}

/// Reference maximum: 2000×2000 grid, best cells polished by CMA-ES.
fn optimum() -> &'static (f64, Vec<f64>) {
    static OPT: OnceLock<(f64, Vec<f64>)> = OnceLock::new();
    OPT.get_or_init(|| {
        let domain = BoxDomain::cube(2, 0.0, 10.0).unwrap();
        let f = |x: &[f64]| LangermannOuter.eval(&inner(x));
        let step = 10.0 / (GRID - 1) as f64;
        let grid = (0..GRID * GRID).map(|k| vec![(k / GRID) as f64 * step, (k % GRID) as f64 * step]);
        polish_maximum(f, &domain, grid, 20)
    })
}

/// Two-dimensional Langermann function on `[0, 10]²` with `m = 5`,
/// maximized as written.
pub fn langermann() -> CompositeProblem {
    let (f_max, x_ref) = optimum().clone();
    CompositeProblem::new(
        "langermann",
        BoxDomain::cube(2, 0.0, 10.0).unwrap(),
        5,
        Arc::new(inner),
        Arc::new(LangermannOuter),
    )
    .with_optimum(f_max, Some(x_ref))
}
