use ndarray::Array2;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::model::ConditionalDensityModel;
use crate::error::Result;
use crate::rng::RandomStream;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;
pub const CHECKED_PARAMETERS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub checked: Vec<usize>,
    /// `|g_a − g_fd| / max(1e-8, |g_a| + |g_fd|)` per checked parameter.
    pub relative_errors: Vec<f64>,
    pub max_relative_error: f64,
    pub baseline_loss: f64,
    /// Loss recomputed after every perturbation was undone.
    pub restored_loss: f64,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_relative_error < tolerance && self.baseline_loss == self.restored_loss
    }
}

/// Compares the analytic NLL gradient against central finite differences on
/// up to [`CHECKED_PARAMETERS`] randomly chosen trainable parameters.
pub fn grad_check(
    model: &mut ConditionalDensityModel,
    summaries: &Array2<f64>,
    thetas: &Array2<f64>,
    stream: &RandomStream,
) -> Result<GradCheckReport> {
    let (baseline_loss, analytic) = model.nll_loss_and_grad(summaries, thetas)?;
    let n = model.n_parameters();
    let mut checked = sample(&mut stream.rng(), n, CHECKED_PARAMETERS.min(n)).into_vec();
    checked.sort_unstable();
    let mut relative_errors = Vec::with_capacity(checked.len());
    for &i in &checked {
        let original = model.parameters()[i];
        model.parameters_mut()[i] = original + FD_STEP;
        let up = model.nll_loss(summaries, thetas)?;
        model.parameters_mut()[i] = original - FD_STEP;
        let down = model.nll_loss(summaries, thetas)?;
        model.parameters_mut()[i] = original;
        let fd = (up - down) / (2.0 * FD_STEP);
        let ga = analytic[i];
        relative_errors.push((ga - fd).abs() / (ga.abs() + fd.abs()).max(1e-8));
    }
    let restored_loss = model.nll_loss(summaries, thetas)?;
    let max_relative_error = relative_errors.iter().copied().fold(0.0, f64::max);
    Ok(GradCheckReport {
        checked,
        relative_errors,
        max_relative_error,
        baseline_loss,
        restored_loss,
    })
}
