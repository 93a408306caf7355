//! Gaussian mixtures with full covariance, parameterized by Cholesky factors.

use ndarray::{s, Array1, Array2, Array3, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math::{backward_substitute_transpose, cholesky, forward_substitute, log_sum_exp, LN_2PI};
use crate::rng::{RandomStream, StreamRng};

/// Smallest allowed Cholesky diagonal entry.
pub const CHOL_DIAG_FLOOR: f64 = 1e-6;
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureDensity {
    weights: Array1<f64>,
    /// `K×D`
    means: Array2<f64>,
    /// `K×D×D`, lower triangular per component.
    chol: Array3<f64>,
}

impl GaussianMixtureDensity {
    /// Validates the simplex and triangular structure; positive Cholesky
    /// diagonals below [`CHOL_DIAG_FLOOR`] are raised to it.
    pub fn new(weights: Array1<f64>, means: Array2<f64>, mut chol: Array3<f64>) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(invalid("mixture needs at least one component"));
        }
        let d = means.ncols();
        if d == 0 || means.nrows() != k || chol.dim() != (k, d, d) {
            return Err(invalid(format!(
                "inconsistent mixture shapes: {} weights, means {:?}, chol {:?}",
                k,
                means.dim(),
                chol.dim()
            )));
        }
        if weights.iter().any(|&w| !(w.is_finite() && w >= 0.0)) {
            return Err(invalid("mixture weights must be finite and non-negative"));
        }
        let total: f64 = weights.sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(invalid(format!("mixture weights sum to {total}, not 1")));
        }
        if means.iter().chain(chol.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mixture mean or Cholesky entry".into()));
        }
        for c in 0..k {
            for i in 0..d {
                for j in i + 1..d {
                    if chol[[c, i, j]] != 0.0 {
                        return Err(invalid("Cholesky factors must be lower triangular"));
                    }
                }
                let diag = &mut chol[[c, i, i]];
                if *diag <= 0.0 {
                    return Err(invalid("Cholesky diagonal must be positive"));
                }
                *diag = diag.max(CHOL_DIAG_FLOOR);
            }
        }
        Ok(Self { weights, means, chol })
    }

    /// Single Gaussian `N(mean, L Lᵀ)`.
    pub fn single(mean: Array1<f64>, chol: Array2<f64>) -> Result<Self> {
        let d = mean.len();
        let means = mean.into_shape_with_order((1, d)).map_err(|e| invalid(e.to_string()))?;
        let chol = chol.into_shape_with_order((1, d, d)).map_err(|e| invalid(e.to_string()))?;
        Self::new(Array1::ones(1), means, chol)
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn weights(&self) -> ArrayView1<'_, f64> {
        self.weights.view()
    }

    pub fn means(&self) -> ArrayView2<'_, f64> {
        self.means.view()
    }

    pub fn chol(&self, k: usize) -> ArrayView2<'_, f64> {
        self.chol.slice(s![k, .., ..])
    }

    pub fn covariance_of(&self, k: usize) -> Array2<f64> {
        let l = self.chol(k);
        l.dot(&l.t())
    }

    /// `log Σ_k w_k N(θ; μ_k, L_k L_kᵀ)`.
    pub fn logpdf(&self, theta: &[f64]) -> Result<f64> {
        let d = self.dim();
        if theta.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: theta.len(),
            });
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mixture_logpdf argument".into()));
        }
        let mut resid = vec![0.0; d];
        let mut z = vec![0.0; d];
        let terms: Vec<f64> = (0..self.n_components())
            .map(|k| {
                let w = self.weights[k];
                if w == 0.0 {
                    return f64::NEG_INFINITY;
                }
                w.ln() + self.component_logpdf(k, theta, &mut resid, &mut z)
            })
            .collect();
        Ok(log_sum_exp(&terms))
    }

    fn component_logpdf(&self, k: usize, theta: &[f64], resid: &mut [f64], z: &mut [f64]) -> f64 {
        let d = self.dim();
        let mean = self.means.row(k);
        for i in 0..d {
            resid[i] = theta[i] - mean[i];
        }
        let l = self.chol.slice(s![k, .., ..]);
        let l = l.as_slice().expect("standard layout");
        forward_substitute(l, d, resid, z);
        let log_det: f64 = (0..d).map(|i| l[i * d + i].ln()).sum();
        -0.5 * z.iter().map(|v| v * v).sum::<f64>() - log_det - 0.5 * d as f64 * LN_2PI
    }

    /// Mahalanobis direction `(L Lᵀ)⁻¹(θ − μ_k)`; used by gradient code and tests.
    pub fn precision_times_residual(&self, k: usize, theta: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let resid: Vec<f64> = theta.iter().zip(self.means.row(k)).map(|(t, m)| t - m).collect();
        let l = self.chol.slice(s![k, .., ..]);
        let l = l.as_slice().expect("standard layout");
        let mut z = vec![0.0; d];
        let mut u = vec![0.0; d];
        forward_substitute(l, d, &resid, &mut z);
        backward_substitute_transpose(l, d, &z, &mut u);
        u
    }

    pub fn sample(&self, stream: &RandomStream, n: usize) -> Result<Array2<f64>> {
        if n == 0 {
            return Err(invalid("mixture_sample needs n >= 1"));
        }
        Ok(self.sample_with(&mut stream.rng(), n))
    }

    pub(crate) fn sample_with(&self, rng: &mut StreamRng, n: usize) -> Array2<f64> {
        let d = self.dim();
        let mut out = Array2::zeros((n, d));
        let mut z = vec![0.0; d];
        for mut row in out.rows_mut() {
            let k = self.pick_component(rng.gen::<f64>());
            for v in z.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let l = self.chol(k);
            let mean = self.means.row(k);
            for i in 0..d {
                let mut acc = mean[i];
                for j in 0..=i {
                    acc += l[[i, j]] * z[j];
                }
                row[i] = acc;
            }
        }
        out
    }

    fn pick_component(&self, u: f64) -> usize {
        let mut cum = 0.0;
        let mut last = 0;
        for (k, &w) in self.weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            cum += w;
            last = k;
            if u < cum {
                return k;
            }
        }
        last
    }

    /// Exact 2-D marginal over `dims`.
    pub fn marginal(&self, dims: (usize, usize)) -> Result<Self> {
        let (a, b) = dims;
        let d = self.dim();
        if a >= d || b >= d {
            return Err(invalid(format!("marginal dims {dims:?} out of range for D={d}")));
        }
        if a == b {
            return Err(invalid(format!("marginal dims must be distinct, got {dims:?}")));
        }
        let k = self.n_components();
        let idx = [a, b];
        let mut means = Array2::zeros((k, 2));
        let mut chol = Array3::zeros((k, 2, 2));
        for c in 0..k {
            let cov = self.covariance_of(c);
            let sub = Array2::from_shape_fn((2, 2), |(i, j)| cov[[idx[i], idx[j]]]);
            let l = cholesky(sub.view())
                .ok_or_else(|| Error::NonFinite("marginal covariance not positive definite".into()))?;
            chol.slice_mut(s![c, .., ..]).assign(&l);
            means[[c, 0]] = self.means[[c, a]];
            means[[c, 1]] = self.means[[c, b]];
        }
        Self::new(self.weights.clone(), means, chol)
    }

    /// Distribution of `scale ⊙ y + shift` for `y` drawn from this mixture.
    pub fn affine(&self, scale: &[f64], shift: &[f64]) -> Result<Self> {
        let d = self.dim();
        if scale.len() != d || shift.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: scale.len().min(shift.len()),
            });
        }
        if scale.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(invalid("affine scale must be positive"));
        }
        let mut means = self.means.clone();
        let mut chol = self.chol.clone();
        for c in 0..self.n_components() {
            for i in 0..d {
                means[[c, i]] = scale[i] * means[[c, i]] + shift[i];
                for j in 0..=i {
                    chol[[c, i, j]] *= scale[i];
                }
            }
        }
        Self::new(self.weights.clone(), means, chol)
    }

    pub fn mean(&self) -> Array1<f64> {
        self.weights.dot(&self.means)
    }

    /// Mixture covariance: `Σ_k w_k (Σ_k + μ_k μ_kᵀ) − μ μᵀ`.
    pub fn covariance(&self) -> Array2<f64> {
        let d = self.dim();
        let mu = self.mean();
        let mut cov = Array2::zeros((d, d));
        for c in 0..self.n_components() {
            let w = self.weights[c];
            let m = self.means.row(c);
            let sc = self.covariance_of(c);
            for i in 0..d {
                for j in 0..d {
                    cov[[i, j]] += w * (sc[[i, j]] + m[i] * m[j]);
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                cov[[i, j]] -= mu[i] * mu[j];
            }
        }
        cov
    }
}
