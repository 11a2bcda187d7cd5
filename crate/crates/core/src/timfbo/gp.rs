//! Zero-mean Gaussian process with a squared-exponential ARD kernel.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest noise variance used on the Gram diagonal.
pub const MIN_NOISE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GpError {
    #[error("input has dimension {found}, the surrogate expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("observation {0} has a non-finite input or target")]
    NonFinite(usize),
    #[error("kernel matrix is not positive definite after jitter (condition estimate {condition:.3e})")]
    NotPositiveDefinite { condition: f64 },
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("proxy discount must lie in (0, 1], got {0}")]
    InvalidDiscount(f64),
    #[error("acquisition cost must be positive, got {0}")]
    NonPositiveCost(f64),
}

/// `k(a, b) = signal_variance * exp(-0.5 * sum_d ((a_d - b_d) / l_d)^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl Kernel {
    pub fn isotropic(dim: usize, lengthscale: f64, signal_variance: f64, noise_variance: f64) -> Self {
        Self { lengthscales: vec![lengthscale; dim], signal_variance, noise_variance }
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn validate(&self) -> Result<(), GpError> {
        if self.lengthscales.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(GpError::InvalidKernel("length-scales must be positive".into()));
        }
        if !(self.signal_variance.is_finite() && self.signal_variance > 0.0) {
            return Err(GpError::InvalidKernel("signal variance must be positive".into()));
        }
        if !(self.noise_variance.is_finite() && self.noise_variance >= 0.0) {
            return Err(GpError::InvalidKernel("noise variance must be non-negative".into()));
        }
        Ok(())
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let r2: f64 = a.iter().zip(b).zip(&self.lengthscales).map(|((x, y), l)| ((x - y) / l).powi(2)).sum();
        self.signal_variance * (-0.5 * r2).exp()
    }

    /// Noise variance actually placed on the diagonal.
    pub fn effective_noise(&self) -> f64 {
        self.noise_variance.max(MIN_NOISE)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub x: Vec<f64>,
    pub y: f64,
    /// Noise variance of this observation when it differs from the kernel's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
}

impl Observation {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Self { x, y, noise: None }
    }
}

/// Conditioned GP. `l_inv` is the inverse of the lower Cholesky factor of
/// `K + diag(noise) + jitter I`; `alpha` solves that system against `y`.
#[derive(Debug, Clone)]
pub struct GpSurrogate {
    kernel: Kernel,
    obs: Vec<Observation>,
    l_inv: DMatrix<f64>,
    alpha: DVector<f64>,
    log_det: f64,
    jitter: f64,
}

fn gram(kernel: &Kernel, obs: &[Observation]) -> DMatrix<f64> {
    let n = obs.len();
    let base = kernel.effective_noise();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let v = kernel.eval(&obs[i].x, &obs[j].x);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] = kernel.signal_variance + obs[i].noise.map_or(base, |v| v.max(MIN_NOISE));
    }
    k
}

fn condition_estimate(k: &DMatrix<f64>) -> f64 {
    let ev = k.clone().symmetric_eigenvalues();
    let max = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = ev.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

impl GpSurrogate {
    /// Conditions the prior on `obs`. If the Cholesky factorization fails,
    /// jitter growing tenfold from `1e-10 * signal_variance` is added to the
    /// diagonal, up to `1e-4 * signal_variance`.
    pub fn fit(obs: Vec<Observation>, kernel: Kernel) -> Result<Self, GpError> {
        kernel.validate()?;
        let d = kernel.dim();
        for (i, o) in obs.iter().enumerate() {
            if o.x.len() != d {
                return Err(GpError::DimensionMismatch { expected: d, found: o.x.len() });
            }
            if !o.y.is_finite() || o.x.iter().any(|v| !v.is_finite()) || o.noise.is_some_and(|v| !v.is_finite()) {
                return Err(GpError::NonFinite(i));
            }
        }
        let k = gram(&kernel, &obs);
        let n = obs.len();
        let y = DVector::from_iterator(n, obs.iter().map(|o| o.y));
        let mut jitter = 0.0;
        loop {
            let mut kj = k.clone();
            for i in 0..n {
                kj[(i, i)] += jitter;
            }
            if let Some(ch) = Cholesky::new(kj) {
                let l = ch.l();
                let l_inv = l
                    .solve_lower_triangular(&DMatrix::identity(n, n))
                    .ok_or(GpError::NotPositiveDefinite { condition: f64::INFINITY })?;
                let alpha = ch.solve(&y);
                let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
                return Ok(Self { kernel, obs, l_inv, alpha, log_det, jitter });
            }
            jitter = if jitter == 0.0 { 1e-10 * kernel.signal_variance } else { jitter * 10.0 };
            if jitter > 1e-4 * kernel.signal_variance {
                return Err(GpError::NotPositiveDefinite { condition: condition_estimate(&k) });
            }
        }
    }

    /// Fits, then tunes length-scales and signal variance by coordinate
    /// ascent on the log marginal likelihood (noise stays fixed).
    pub fn fit_optimized(obs: Vec<Observation>, kernel: Kernel) -> Result<Self, GpError> {
        let mut best = Self::fit(obs, kernel)?;
        if best.obs.len() < 2 {
            return Ok(best);
        }
        let mut best_lml = best.log_marginal_likelihood();
        let mut step = std::f64::consts::LN_2;
        for _ in 0..6 {
            let mut improved = false;
            for coord in 0..=best.kernel.dim() {
                for dir in [1.0, -1.0] {
                    let mut k = best.kernel.clone();
                    let f = (dir * step).exp();
                    if coord < k.dim() {
                        k.lengthscales[coord] = (k.lengthscales[coord] * f).clamp(1e-2, 1e2);
                    } else {
                        k.signal_variance = (k.signal_variance * f).clamp(1e-3, 1e3);
                    }
                    if let Ok(gp) = Self::fit(best.obs.clone(), k) {
                        let lml = gp.log_marginal_likelihood();
                        if lml > best_lml + 1e-9 {
                            best = gp;
                            best_lml = lml;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                step /= 2.0;
            }
        }
        Ok(best)
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn observations(&self) -> &[Observation] {
        &self.obs
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.obs.len() as f64;
        let y = DVector::from_iterator(self.obs.len(), self.obs.iter().map(|o| o.y));
        -0.5 * y.dot(&self.alpha) - 0.5 * self.log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }

    /// Predictive mean and latent variance (clipped at 0) at `x`.
    pub fn posterior(&self, x: &[f64]) -> Result<(f64, f64), GpError> {
        Ok(self.posterior_batch(std::slice::from_ref(&x.to_vec()))?[0])
    }

    pub fn posterior_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<(f64, f64)>, GpError> {
        let d = self.dim();
        if let Some(x) = xs.iter().find(|x| x.len() != d) {
            return Err(GpError::DimensionMismatch { expected: d, found: x.len() });
        }
        let n = self.obs.len();
        let sf2 = self.kernel.signal_variance;
        if n == 0 {
            return Ok(vec![(0.0, sf2); xs.len()]);
        }
        let kstar = DMatrix::from_fn(n, xs.len(), |i, j| self.kernel.eval(&self.obs[i].x, &xs[j]));
        let means = kstar.tr_mul(&self.alpha);
        let v = &self.l_inv * &kstar;
        Ok((0..xs.len())
            .map(|j| {
                let var = sf2 - v.column(j).norm_squared();
                (means[j], var.max(0.0))
            })
            .collect())
    }
}
