//! Full-covariance mixture head: decoding raw network outputs into mixture
//! parameters and the per-example NLL gradient with respect to those outputs.
//!
//! Output layout for `K` components over `D` dims:
//! `[logits (K) | means (K·D) | raw diagonals (K·D) | strict lower (K·D(D−1)/2)]`,
//! the strict-lower block row-major per component (`(1,0), (2,0), (2,1), …`).

use ndarray::{Array1, Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::math::{backward_substitute_transpose, forward_substitute, log_sum_exp, sigmoid, softplus, LN_2PI};
use crate::mixture::{GaussianMixtureDensity, CHOL_DIAG_FLOOR};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadLayout {
    pub components: usize,
    pub dim: usize,
}

impl HeadLayout {
    pub fn new(components: usize, dim: usize) -> Self {
        Self { components, dim }
    }

    fn n_lower(&self) -> usize {
        self.dim * (self.dim - 1) / 2
    }

    pub fn size(&self) -> usize {
        let (k, d) = (self.components, self.dim);
        k + 2 * k * d + k * self.n_lower()
    }

    pub fn logit(&self, k: usize) -> usize {
        k
    }

    pub fn mean(&self, k: usize, i: usize) -> usize {
        self.components + k * self.dim + i
    }

    pub fn raw_diag(&self, k: usize, i: usize) -> usize {
        self.components * (1 + self.dim) + k * self.dim + i
    }

    /// Index of the strict-lower entry `(i, j)`, `i > j`.
    pub fn lower(&self, k: usize, i: usize, j: usize) -> usize {
        debug_assert!(i > j);
        self.components * (1 + 2 * self.dim) + k * self.n_lower() + i * (i - 1) / 2 + j
    }
}

/// Decoded parameters of one example, in standardized space.
pub(crate) struct Decoded {
    pub log_weights: Vec<f64>,
    pub means: Vec<f64>,
    /// `K` row-major `D×D` lower-triangular factors.
    pub chol: Vec<f64>,
    /// `sigmoid(raw)`, the derivative of each diagonal w.r.t. its raw output.
    pub diag_slope: Vec<f64>,
}

pub(crate) fn decode(layout: &HeadLayout, out: &[f64]) -> Decoded {
    let (kk, d) = (layout.components, layout.dim);
    let logits = &out[..kk];
    let lse = log_sum_exp(logits);
    let log_weights = logits.iter().map(|l| l - lse).collect();
    let means = out[layout.mean(0, 0)..layout.mean(0, 0) + kk * d].to_vec();
    let mut chol = vec![0.0; kk * d * d];
    let mut diag_slope = vec![0.0; kk * d];
    for k in 0..kk {
        let l = &mut chol[k * d * d..(k + 1) * d * d];
        for i in 0..d {
            let raw = out[layout.raw_diag(k, i)];
            l[i * d + i] = softplus(raw) + CHOL_DIAG_FLOOR;
            diag_slope[k * d + i] = sigmoid(raw);
            for j in 0..i {
                l[i * d + j] = out[layout.lower(k, i, j)];
            }
        }
    }
    Decoded {
        log_weights,
        means,
        chol,
        diag_slope,
    }
}

pub(crate) fn to_mixture(layout: &HeadLayout, dec: &Decoded) -> Result<GaussianMixtureDensity> {
    let (kk, d) = (layout.components, layout.dim);
    // renormalize explicitly so the simplex check holds to rounding
    let w: Vec<f64> = dec.log_weights.iter().map(|l| l.exp()).collect();
    let total: f64 = w.iter().sum();
    let weights = Array1::from_iter(w.iter().map(|v| v / total));
    let means = Array2::from_shape_vec((kk, d), dec.means.clone()).expect("shape");
    let chol = Array3::from_shape_vec((kk, d, d), dec.chol.clone()).expect("shape");
    GaussianMixtureDensity::new(weights, means, chol)
}

/// Per-component scratch space reused across examples.
pub(crate) struct Scratch {
    resid: Vec<f64>,
    z: Vec<f64>,
    u: Vec<f64>,
    comp_ll: Vec<f64>,
    zs: Vec<f64>,
    us: Vec<f64>,
}

impl Scratch {
    pub fn new(layout: &HeadLayout) -> Self {
        let (k, d) = (layout.components, layout.dim);
        Self {
            resid: vec![0.0; d],
            z: vec![0.0; d],
            u: vec![0.0; d],
            comp_ll: vec![0.0; k],
            zs: vec![0.0; k * d],
            us: vec![0.0; k * d],
        }
    }
}

/// `−log q(y)` for one example. When `grad` is given, `scale · ∂(−log q)/∂out`
/// is accumulated into it.
pub(crate) fn nll(
    layout: &HeadLayout,
    out: &[f64],
    y: &[f64],
    scratch: &mut Scratch,
    grad: Option<(&mut [f64], f64)>,
) -> f64 {
    let (kk, d) = (layout.components, layout.dim);
    let dec = decode(layout, out);
    for k in 0..kk {
        let l = &dec.chol[k * d * d..(k + 1) * d * d];
        for i in 0..d {
            scratch.resid[i] = y[i] - dec.means[k * d + i];
        }
        forward_substitute(l, d, &scratch.resid, &mut scratch.z);
        let log_det: f64 = (0..d).map(|i| l[i * d + i].ln()).sum();
        let sq: f64 = scratch.z.iter().map(|v| v * v).sum();
        scratch.comp_ll[k] = dec.log_weights[k] - 0.5 * sq - log_det - 0.5 * d as f64 * LN_2PI;
        if grad.is_some() {
            backward_substitute_transpose(l, d, &scratch.z, &mut scratch.u);
            scratch.zs[k * d..(k + 1) * d].copy_from_slice(&scratch.z);
            scratch.us[k * d..(k + 1) * d].copy_from_slice(&scratch.u);
        }
    }
    let total = log_sum_exp(&scratch.comp_ll);
    if let Some((g, scale)) = grad {
        for k in 0..kk {
            let resp = (scratch.comp_ll[k] - total).exp();
            let weight = dec.log_weights[k].exp();
            g[layout.logit(k)] += scale * (weight - resp);
            let z = &scratch.zs[k * d..(k + 1) * d];
            let u = &scratch.us[k * d..(k + 1) * d];
            let l = &dec.chol[k * d * d..(k + 1) * d * d];
            for i in 0..d {
                g[layout.mean(k, i)] -= scale * resp * u[i];
                // ∂log N/∂L_ii = u_i z_i − 1/L_ii, chained through softplus
                let dl = u[i] * z[i] - 1.0 / l[i * d + i];
                g[layout.raw_diag(k, i)] -= scale * resp * dl * dec.diag_slope[k * d + i];
                for j in 0..i {
                    g[layout.lower(k, i, j)] -= scale * resp * u[i] * z[j];
                }
            }
        }
    }
    -total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_dense_and_disjoint() {
        let layout = HeadLayout::new(3, 4);
        let mut seen = vec![false; layout.size()];
        for k in 0..3 {
            let mut mark = |i: usize| {
                assert!(!seen[i]);
                seen[i] = true;
            };
            mark(layout.logit(k));
            for i in 0..4 {
                mark(layout.mean(k, i));
                mark(layout.raw_diag(k, i));
                for j in 0..i {
                    mark(layout.lower(k, i, j));
                }
            }
        }
        assert!(seen.into_iter().all(|s| s));
        assert_eq!(layout.size(), 3 + 24 + 18);
    }

    #[test]
    fn nll_matches_mixture_logpdf() {
        let layout = HeadLayout::new(2, 3);
        let out: Vec<f64> = (0..layout.size()).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect();
        let y = [0.3, -0.2, 0.9];
        let mix = to_mixture(&layout, &decode(&layout, &out)).unwrap();
        let mut scratch = Scratch::new(&layout);
        let v = nll(&layout, &out, &y, &mut scratch, None);
        assert_close!(v, -mix.logpdf(&y).unwrap(), 1e-12);
    }

    #[test]
    fn output_gradient_matches_finite_differences() {
        let layout = HeadLayout::new(3, 2);
        let out: Vec<f64> = (0..layout.size()).map(|i| ((i * 53 % 17) as f64 - 8.0) / 9.0).collect();
        let y = [0.4, -0.7];
        let mut scratch = Scratch::new(&layout);
        let mut g = vec![0.0; layout.size()];
        nll(&layout, &out, &y, &mut scratch, Some((&mut g, 1.0)));
        let h = 1e-6;
        for i in 0..out.len() {
            let mut p = out.clone();
            p[i] += h;
            let up = nll(&layout, &p, &y, &mut scratch, None);
            p[i] -= 2.0 * h;
            let down = nll(&layout, &p, &y, &mut scratch, None);
            assert_close!(g[i], (up - down) / (2.0 * h), 1e-7);
        }
    }
}
