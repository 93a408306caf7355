use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::prior::ParamSpace;

pub const STD_FLOOR: f64 = 1e-8;

/// Input z-scoring from training statistics plus the affine map taking each
/// parameter box `[low, high]` onto `[-1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    input: Option<InputStats>,
    output_scale: Vec<f64>,
    output_center: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct InputStats {
    mean: Array1<f64>,
    std: Array1<f64>,
}

impl Standardizer {
    /// Output map only; input statistics still need [`Standardizer::fit_inputs`].
    pub fn for_space(space: &ParamSpace) -> Self {
        Self {
            input: None,
            output_scale: space.dims().iter().map(|d| 0.5 * d.width()).collect(),
            output_center: space.dims().iter().map(|d| 0.5 * (d.low + d.high)).collect(),
        }
    }

    pub fn fit(summaries: &Array2<f64>, space: &ParamSpace) -> Result<Self> {
        let mut s = Self::for_space(space);
        s.fit_inputs(summaries)?;
        Ok(s)
    }

    pub fn fit_inputs(&mut self, summaries: &Array2<f64>) -> Result<()> {
        if summaries.nrows() == 0 {
            return Err(invalid("cannot fit a standardizer on zero rows"));
        }
        let n = summaries.nrows() as f64;
        let mean = summaries.sum_axis(ndarray::Axis(0)) / n;
        let mut var = Array1::<f64>::zeros(summaries.ncols());
        for row in summaries.rows() {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m).powi(2);
            }
        }
        let std = var.mapv(|v| (v / n).sqrt().max(STD_FLOOR));
        if mean.iter().chain(std.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("summary statistics".into()));
        }
        self.input = Some(InputStats { mean, std });
        Ok(())
    }

    pub fn is_fitted(&self) -> bool {
        self.input.is_some()
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.input.as_ref().map(|s| s.mean.len())
    }

    pub fn output_dim(&self) -> usize {
        self.output_scale.len()
    }

    pub fn standardize_input(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        let stats = self.input.as_ref().ok_or(Error::UnfittedStandardizer)?;
        if x.len() != stats.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: stats.mean.len(),
                got: x.len(),
            });
        }
        Ok((&x - &stats.mean) / &stats.std)
    }

    pub fn standardize_inputs(&self, xs: &Array2<f64>) -> Result<Array2<f64>> {
        let stats = self.input.as_ref().ok_or(Error::UnfittedStandardizer)?;
        if xs.ncols() != stats.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: stats.mean.len(),
                got: xs.ncols(),
            });
        }
        Ok((xs - &stats.mean) / &stats.std)
    }

    /// `θ ↦ (θ − center) / scale`
    pub fn to_standard(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(&self.output_scale)
            .zip(&self.output_center)
            .map(|((t, s), c)| (t - c) / s)
            .collect()
    }

    pub fn from_standard(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(&self.output_scale)
            .zip(&self.output_center)
            .map(|((y, s), c)| y * s + c)
            .collect()
    }

    pub fn output_scale(&self) -> &[f64] {
        &self.output_scale
    }

    pub fn output_center(&self) -> &[f64] {
        &self.output_center
    }

    /// `Σ_d log scale_d`; raw-space log-density is standardized minus this.
    pub fn log_jacobian(&self) -> f64 {
        self.output_scale.iter().map(|s| s.ln()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn output_map_round_trips() {
        let space = ParamSpace::from_bounds([("m", 0.5, 2.0), ("l", 0.3, 1.5)]).unwrap();
        let s = Standardizer::for_space(&space);
        assert_eq!(s.to_standard(&[0.5, 1.5]), vec![-1.0, 1.0]);
        let back = s.from_standard(&s.to_standard(&[1.2, 0.7]));
        assert_close!(back[0], 1.2, 1e-15);
        assert_close!(back[1], 0.7, 1e-15);
    }

    #[test]
    fn unfitted_input_errors() {
        let space = ParamSpace::from_bounds([("m", 0.0, 1.0)]).unwrap();
        let s = Standardizer::for_space(&space);
        assert!(matches!(
            s.standardize_input(array![1.0].view()),
            Err(Error::UnfittedStandardizer)
        ));
    }

    #[test]
    fn constant_column_uses_floor() {
        let space = ParamSpace::from_bounds([("m", 0.0, 1.0)]).unwrap();
        let s = Standardizer::fit(&array![[1.0, 2.0], [1.0, 4.0]], &space).unwrap();
        let z = s.standardize_input(array![1.0, 3.0].view()).unwrap();
        assert_eq!(z, array![0.0, 0.0]);
        let z = s.standardize_input(array![1.0, 4.0].view()).unwrap();
        assert_close!(z[1], 1.0, 1e-15);
    }
}
