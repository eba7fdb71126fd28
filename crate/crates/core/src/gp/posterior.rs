use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Gaussian posterior on `h(x)` at a single point: mean, covariance, its lower
/// Cholesky factor and, optionally, their spatial derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPosterior {
    pub mean: Vec<f64>,
    pub cov: DMatrix<f64>,
    pub chol: DMatrix<f64>,
    /// `d_mean[(j, k)] = ∂μ_j/∂x_k`.
    pub d_mean: Option<DMatrix<f64>>,
    /// `d_chol[k] = ∂C/∂x_k`.
    pub d_chol: Option<Vec<DMatrix<f64>>>,
    /// Per-output standard deviations when `cov` is diagonal.
    std: Option<Vec<f64>>,
}

impl GaussianPosterior {
    /// Independent outputs with the given variances (clamped at zero).
    pub fn diagonal(mean: Vec<f64>, variance: &[f64]) -> Self {
        assert_eq!(mean.len(), variance.len());
        let m = mean.len();
        let var: Vec<f64> = variance.iter().map(|v| v.max(0.0)).collect();
        let std: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();
        Self {
            mean,
            cov: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(var)),
            chol: DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&std)),
            d_mean: None,
            d_chol: None,
            std: Some(std).filter(|_| m > 0),
        }
    }

    /// General (possibly correlated) posterior. The covariance must be positive
    /// semidefinite; a zero matrix is accepted.
    pub fn dense(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let m = mean.len();
        assert_eq!((cov.nrows(), cov.ncols()), (m, m));
        let chol = lower_cholesky_psd(&cov).ok_or(Error::NonPositiveDefinite { jitter: 0.0 })?;
        Ok(Self {
            mean,
            cov,
            chol,
            d_mean: None,
            d_chol: None,
            std: None,
        })
    }

    pub fn with_gradients(mut self, d_mean: DMatrix<f64>, d_chol: Vec<DMatrix<f64>>) -> Self {
        self.d_mean = Some(d_mean);
        self.d_chol = Some(d_chol);
        self
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn is_diagonal(&self) -> bool {
        self.std.is_some()
    }

    pub fn has_gradients(&self) -> bool {
        self.d_mean.is_some() && self.d_chol.is_some()
    }

    /// Per-output variances (the diagonal of `cov`).
    pub fn variances(&self) -> Vec<f64> {
        (0..self.dim()).map(|j| self.cov[(j, j)]).collect()
    }

    /// `out = μ + C z`.
    #[inline]
    pub fn reparameterize(&self, z: &[f64], out: &mut [f64]) {
        match &self.std {
            Some(std) => {
                for (((o, m), s), z) in out.iter_mut().zip(&self.mean).zip(std).zip(z) {
                    *o = m + s * z;
                }
            }
            None => {
                for j in 0..out.len() {
                    let mut acc = self.mean[j];
                    for l in 0..=j {
                        acc += self.chol[(j, l)] * z[l];
                    }
                    out[j] = acc;
                }
            }
        }
    }

    /// `out_k = Σ_j w_j · (∂μ_j/∂x_k + (∂C/∂x_k · z)_j)`, the x-gradient of
    /// `x ↦ wᵀ(μ(x) + C(x) z)` at fixed `w` and `z`. Requires gradients.
    pub fn pathwise_gradient(&self, z: &[f64], w: &[f64], out: &mut [f64]) {
        let d_mean = self.d_mean.as_ref().expect("posterior lacks d_mean");
        let d_chol = self.d_chol.as_ref().expect("posterior lacks d_chol");
        let m = self.dim();
        for (k, o) in out.iter_mut().enumerate() {
            let dc = &d_chol[k];
            let mut acc = 0.0;
            for j in 0..m {
                let mut dy = d_mean[(j, k)];
                if self.std.is_some() {
                    dy += dc[(j, j)] * z[j];
                } else {
                    for l in 0..=j {
                        dy += dc[(j, l)] * z[l];
                    }
                }
                acc += w[j] * dy;
            }
            *o = acc;
        }
    }
}

/// Lower Cholesky factor of a symmetric PSD matrix. Zero pivots produce zero
/// columns instead of failing.
fn lower_cholesky_psd(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    let tol = 1e-14 * scale.max(f64::MIN_POSITIVE);
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if diag < -tol {
            return None;
        }
        if diag <= tol {
            continue;
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Some(l)
}
