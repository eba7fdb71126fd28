//! Per-output Cholesky factorization of the noise-free training kernel matrix.

use super::kernel::{KernelHyperparams, JITTER_MAX, JITTER_START};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Squared coordinate differences between training inputs, computed once and
/// reused for every hyperparameter value.
#[derive(Debug, Clone)]
pub(crate) struct TrainingGeometry {
    n: usize,
    d: usize,
    /// `sqdiff[(i * n + l) * d + k] = (x_ik - x_lk)^2` for `l < i`.
    sqdiff: Vec<f64>,
}

impl TrainingGeometry {
    pub(crate) fn new(train_x: &[Vec<f64>], d: usize) -> Self {
        let n = train_x.len();
        let mut sqdiff = vec![0.0; n * n * d];
        for i in 0..n {
            for l in 0..i {
                for k in 0..d {
                    let diff = train_x[i][k] - train_x[l][k];
                    sqdiff[(i * n + l) * d + k] = diff * diff;
                }
            }
        }
        Self { n, d, sqdiff }
    }

    /// Row-major kernel matrix; only the lower triangle is filled.
    fn kernel_matrix(&self, hyp: &KernelHyperparams) -> Vec<f64> {
        let n = self.n;
        let inv_ls2 = hyp.inverse_sq_lengthscales();
        let s = hyp.signal_variance;
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            k[i * n + i] = s;
            for l in 0..i {
                let base = (i * n + l) * self.d;
                let r2: f64 = self.sqdiff[base..base + self.d]
                    .iter()
                    .zip(&inv_ls2)
                    .map(|(a, w)| a * w)
                    .sum();
                k[i * n + l] = s * (-0.5 * r2).exp();
            }
        }
        k
    }
}

/// Fitted state of one output under one hyperparameter set.
#[derive(Debug, Clone)]
pub(crate) struct OutputFactor {
    pub hyp: KernelHyperparams,
    pub inv_ls2: Vec<f64>,
    /// Row-major lower-triangular Cholesky factor of `K + jitter·I`.
    pub chol: Vec<f64>,
    /// Weights for the posterior mean: `(K + jitter·I)^{-1} (y - constant_mean)`
    /// followed by a few steps of iterative refinement against the unjittered
    /// `K`, so the mean interpolates even when the jitter had to grow.
    pub alpha: Vec<f64>,
    /// `rᵀ (K + jitter·I)^{-1} r` with `r = y - constant_mean`.
    fit: f64,
    pub n: usize,
}

/// Cholesky factor (row-major lower) of `K + jitter·I`, escalating the jitter
/// from `max(hyp.jitter, 1e-10·s)` by factors of ten up to `1e-4·s`.
fn factorize(base: &[f64], n: usize, hyp: &KernelHyperparams) -> Result<(Vec<f64>, f64)> {
    let s = hyp.signal_variance;
    let mut jitter = hyp.jitter.max(JITTER_START * s);
    let limit = JITTER_MAX * s * (1.0 + 1e-9);
    let mut l = vec![0.0; n * n];
    loop {
        if cholesky_in_place(base, n, jitter, &mut l) {
            if jitter > JITTER_START * s * 1.000_001 {
                log::debug!("kernel jitter escalated to {jitter:e} (signal variance {s:e})");
            }
            return Ok((l, jitter));
        }
        jitter *= 10.0;
        if jitter > limit {
            return Err(Error::NonPositiveDefinite { jitter: jitter / 10.0 });
        }
    }
}

/// Writes the lower Cholesky factor of `a + jitter·I` into `l` (both
/// row-major; only the lower triangle of `a` is read). Returns false when a
/// pivot is not positive.
fn cholesky_in_place(a: &[f64], n: usize, jitter: f64, l: &mut [f64]) -> bool {
    for i in 0..n {
        for j in 0..=i {
            let (head, row_i) = l.split_at_mut(i * n);
            let row_i = &mut row_i[..n];
            let row_j: &[f64] = if j == i { &row_i[..j] } else { &head[j * n..j * n + j] };
            let mut acc = a[i * n + j];
            for (x, y) in row_i[..j].iter().zip(row_j) {
                acc -= x * y;
            }
            if j == i {
                let pivot = acc + jitter;
                if !(pivot > 0.0) {
                    return false;
                }
                row_i[i] = pivot.sqrt();
            } else {
                row_i[j] = acc / head[j * n + j];
            }
        }
    }
    true
}

fn log_det_half(chol: &[f64], n: usize) -> f64 {
    (0..n).map(|i| chol[i * n + i].ln()).sum()
}

impl OutputFactor {
    pub(crate) fn new(geom: &TrainingGeometry, y: &[f64], hyp: &KernelHyperparams) -> Result<Self> {
        let n = geom.n;
        let base = geom.kernel_matrix(hyp);
        let (chol, jitter) = factorize(&base, n, hyp)?;
        let mut hyp = hyp.clone();
        hyp.jitter = jitter;
        let r: Vec<f64> = y.iter().map(|v| v - hyp.constant_mean).collect();
        let mut alpha = forward_solve(&chol, n, &r);
        back_solve_in_place(&chol, n, &mut alpha);
        let fit = r.iter().zip(&alpha).map(|(a, b)| a * b).sum();
        refine(&base, &chol, n, &r, &mut alpha);
        Ok(Self {
            inv_ls2: hyp.inverse_sq_lengthscales(),
            hyp,
            chol,
            alpha,
            fit,
            n,
        })
    }

    /// Gaussian log marginal likelihood of the data this factor was built from.
    pub(crate) fn log_marginal_likelihood(&self) -> f64 {
        -0.5 * self.fit - log_det_half(&self.chol, self.n) - 0.5 * self.n as f64 * LN_2PI
    }
}

/// Quantities that give the log marginal likelihood for any constant mean
/// `c` under fixed covariance hyperparameters:
/// `rᵀK⁻¹r = yᵀK⁻¹y − 2c·1ᵀK⁻¹y + c²·1ᵀK⁻¹1`.
#[derive(Debug, Clone)]
pub(crate) struct Evidence {
    yy: f64,
    oy: f64,
    oo: f64,
    log_det_half: f64,
    n: usize,
}

impl Evidence {
    /// `hyp.constant_mean` is ignored.
    pub(crate) fn new(geom: &TrainingGeometry, y: &[f64], hyp: &KernelHyperparams) -> Result<Self> {
        let n = geom.n;
        let (chol, _) = factorize(&geom.kernel_matrix(hyp), n, hyp)?;
        let u = forward_solve(&chol, n, y);
        let v = forward_solve(&chol, n, &vec![1.0; n]);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        Ok(Self {
            yy: dot(&u, &u),
            oy: dot(&v, &u),
            oo: dot(&v, &v),
            log_det_half: log_det_half(&chol, n),
            n,
        })
    }

    pub(crate) fn log_marginal_likelihood(&self, c: f64) -> f64 {
        let fit = self.yy - 2.0 * c * self.oy + c * c * self.oo;
        -0.5 * fit - self.log_det_half - 0.5 * self.n as f64 * LN_2PI
    }
}

const REFINE_STEPS: usize = 8;

/// Iterative refinement of `K alpha = r` preconditioned by the jittered factor.
/// Stops when the residual no longer shrinks.
fn refine(k: &[f64], chol: &[f64], n: usize, r: &[f64], alpha: &mut Vec<f64>) {
    // k holds the lower triangle only
    let entry = |i: usize, l: usize| if l <= i { k[i * n + l] } else { k[l * n + i] };
    let residual = |a: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| r[i] - (0..n).map(|l| entry(i, l) * a[l]).sum::<f64>())
            .collect()
    };
    let norm = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut res = residual(alpha);
    let mut best = norm(&res);
    for _ in 0..REFINE_STEPS {
        if best == 0.0 {
            break;
        }
        let mut delta = forward_solve(chol, n, &res);
        back_solve_in_place(chol, n, &mut delta);
        let candidate: Vec<f64> = alpha.iter().zip(&delta).map(|(a, d)| a + d).collect();
        let next = residual(&candidate);
        let size = norm(&next);
        if size >= best {
            break;
        }
        *alpha = candidate;
        res = next;
        best = size;
    }
}

/// Solves `L v = b` for row-major lower-triangular `L`.
pub(crate) fn forward_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut v = vec![0.0; n];
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let mut acc = b[i];
        for (lij, vj) in row.iter().zip(&v[..i]) {
            acc -= lij * vj;
        }
        v[i] = acc / l[i * n + i];
    }
    v
}

/// Solves `Lᵀ w = v` in place.
pub(crate) fn back_solve_in_place(l: &[f64], n: usize, v: &mut [f64]) {
    for i in (0..n).rev() {
        let wi = v[i] / l[i * n + i];
        v[i] = wi;
        let row = &l[i * n..i * n + i];
        for (vj, lij) in v[..i].iter_mut().zip(row) {
            *vj -= lij * wi;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangular_solves() {
        // L = [[2,0],[1,3]]
        let l = vec![2.0, 0.0, 1.0, 3.0];
        let v = forward_solve(&l, 2, &[4.0, 11.0]);
        assert_eq!(v, vec![2.0, 3.0]);
        let mut w = vec![4.0, 9.0];
        back_solve_in_place(&l, 2, &mut w);
        // Lᵀ = [[2,1],[0,3]] → w1 = 3, w0 = (4 - 3)/2
        assert_eq!(w, vec![0.5, 3.0]);
    }

    #[test]
    fn cholesky_reconstructs_matrix() {
        // lower triangle of [[4,2,0.4],[2,5,1],[0.4,1,3]]
        let a = vec![4.0, 0.0, 0.0, 2.0, 5.0, 0.0, 0.4, 1.0, 3.0];
        let mut l = vec![0.0; 9];
        assert!(cholesky_in_place(&a, 3, 0.0, &mut l));
        for i in 0..3 {
            for j in 0..=i {
                let v: f64 = (0..3).map(|k| l[i * 3 + k] * l[j * 3 + k]).sum();
                assert!((v - a[i * 3 + j]).abs() < 1e-14);
            }
        }
        let singular = vec![1.0, 0.0, 1.0, 1.0];
        assert!(!cholesky_in_place(&singular, 2, 0.0, &mut vec![0.0; 4]));
        assert!(cholesky_in_place(&singular, 2, 1e-10, &mut vec![0.0; 4]));
    }

    #[test]
    fn jitter_escalates_for_near_duplicates() {
        let x = vec![vec![0.0], vec![1e-9]];
        let geom = TrainingGeometry::new(&x, 1);
        let hyp = KernelHyperparams::new(0.0, 1.0, vec![1.0]);
        let f = OutputFactor::new(&geom, &[0.0, 0.0], &hyp).unwrap();
        assert!(f.hyp.jitter >= 1e-10 && f.hyp.jitter <= 1e-4);
    }

    #[test]
    fn evidence_matches_factor_for_any_mean() {
        let x = vec![vec![0.1, 0.2], vec![0.5, 0.9], vec![0.8, 0.3]];
        let y = [1.0, -0.5, 2.0];
        let geom = TrainingGeometry::new(&x, 2);
        let mut hyp = KernelHyperparams::new(0.0, 1.3, vec![0.4, 0.7]);
        let ev = Evidence::new(&geom, &y, &hyp).unwrap();
        for c in [-1.0, 0.0, 0.7, 3.0] {
            hyp.constant_mean = c;
            let f = OutputFactor::new(&geom, &y, &hyp).unwrap();
            let a = f.log_marginal_likelihood();
            assert!((a - ev.log_marginal_likelihood(c)).abs() <= 1e-10 * a.abs().max(1.0));
        }
    }
}
