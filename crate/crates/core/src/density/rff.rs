//! Random Fourier features for the RBF kernel.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::RandomStream;

/// Rows of the median-heuristic subsample.
pub const MEDIAN_SUBSAMPLE: usize = 1000;

/// `√(2/R)·cos(Ωx + b)`.
pub fn rff_features(x: ArrayView1<'_, f64>, omega: ArrayView2<'_, f64>, phase: ArrayView1<'_, f64>) -> Array1<f64> {
    let r = omega.nrows();
    let amp = (2.0 / r as f64).sqrt();
    let mut out = omega.dot(&x);
    out.zip_mut_with(&phase, |o, b| *o = amp * (*o + b).cos());
    out
}

/// Frozen feature map. `Ω = Z/σ` with `Z` standard normal, `b ~ U[0, 2π]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RffMap {
    omega: Array2<f64>,
    phase: Array1<f64>,
    bandwidth: f64,
}

impl RffMap {
    pub fn new(n_features: usize, input_dim: usize, bandwidth: f64, stream: &RandomStream) -> Result<Self> {
        if n_features == 0 {
            return Err(invalid("RFF needs at least one feature"));
        }
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(invalid(format!("RFF bandwidth must be positive, got {bandwidth}")));
        }
        let mut rng = stream.rng();
        let omega = Array2::from_shape_fn((n_features, input_dim), |_| rng.sample::<f64, _>(StandardNormal) / bandwidth);
        let phase = Array1::from_shape_fn(n_features, |_| rng.gen_range(0.0..2.0 * std::f64::consts::PI));
        Ok(Self { omega, phase, bandwidth })
    }

    pub fn n_features(&self) -> usize {
        self.omega.nrows()
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn omega(&self) -> ArrayView2<'_, f64> {
        self.omega.view()
    }

    pub fn phase(&self) -> ArrayView1<'_, f64> {
        self.phase.view()
    }

    /// Features for every row of `xs`.
    pub fn transform(&self, xs: &Array2<f64>) -> Array2<f64> {
        let amp = (2.0 / self.n_features() as f64).sqrt();
        let mut out = xs.dot(&self.omega.t());
        for mut row in out.rows_mut() {
            row.zip_mut_with(&self.phase, |o, b| *o = amp * (*o + b).cos());
        }
        out
    }
}

/// Median pairwise Euclidean distance among the first [`MEDIAN_SUBSAMPLE`] rows.
pub fn median_heuristic(xs: &Array2<f64>) -> Result<f64> {
    let n = xs.nrows().min(MEDIAN_SUBSAMPLE);
    if n < 2 {
        return Err(invalid("median heuristic needs at least two rows"));
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d2: f64 = xs.row(i).iter().zip(xs.row(j)).map(|(a, b)| (a - b).powi(2)).sum();
            dists.push(d2.sqrt());
        }
    }
    let mid = dists.len() / 2;
    let (_, m, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    let m = *m;
    if m > 0.0 {
        Ok(m)
    } else {
        // degenerate (mostly duplicate) inputs
        Ok(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_map_is_constant() {
        let omega = Array2::zeros((4, 3));
        let phase = Array1::zeros(4);
        let f = rff_features(array![1.0, -2.0, 3.0].view(), omega.view(), phase.view());
        assert!(f.iter().all(|&v| (v - 0.5f64.sqrt()).abs() < 1e-15));
    }

    #[test]
    fn features_are_bounded() {
        let map = RffMap::new(50, 3, 0.7, &RandomStream::new(1, "rff")).unwrap();
        let f = rff_features(array![10.0, -3.0, 0.2].view(), map.omega(), map.phase());
        let bound = (2.0f64 / 50.0).sqrt();
        assert!(f.iter().all(|v| v.abs() <= bound + 1e-15));
        let batch = map.transform(&array![[10.0, -3.0, 0.2]]);
        assert!(batch.row(0).iter().zip(&f).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn median_of_collinear_points() {
        let xs = array![[0.0], [1.0], [3.0]];
        // distances 1, 3, 2
        assert_eq!(median_heuristic(&xs).unwrap(), 2.0);
    }

    #[test]
    fn rejects_bad_bandwidth() {
        assert!(RffMap::new(8, 2, 0.0, &RandomStream::new(1, "x")).is_err());
        assert!(RffMap::new(0, 2, 1.0, &RandomStream::new(1, "x")).is_err());
    }
}
