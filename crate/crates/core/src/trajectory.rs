use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// One episode: `T` state rows and `T` action rows sampled every `dt` seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    states: Array2<f64>,
    actions: Array2<f64>,
    dt: f64,
    /// Generating parameters; `None` for surrogate-real episodes.
    params: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn new(
        states: Array2<f64>,
        actions: Array2<f64>,
        dt: f64,
        params: Option<Vec<f64>>,
    ) -> Result<Self> {
        if states.nrows() != actions.nrows() {
            return Err(invalid(format!(
                "states have {} rows but actions have {}",
                states.nrows(),
                actions.nrows()
            )));
        }
        if states.nrows() < 2 {
            return Err(invalid("trajectory needs T >= 2"));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid(format!("dt must be positive, got {dt}")));
        }
        if states.iter().chain(actions.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("trajectory entry".into()));
        }
        Ok(Self {
            states,
            actions,
            dt,
            params,
        })
    }

    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn state_dim(&self) -> usize {
        self.states.ncols()
    }

    pub fn action_dim(&self) -> usize {
        self.actions.ncols()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn states(&self) -> &Array2<f64> {
        &self.states
    }

    pub fn actions(&self) -> &Array2<f64> {
        &self.actions
    }

    pub fn state(&self, t: usize) -> ArrayView1<'_, f64> {
        self.states.row(t)
    }

    pub fn action(&self, t: usize) -> ArrayView1<'_, f64> {
        self.actions.row(t)
    }

    pub fn params(&self) -> Option<&[f64]> {
        self.params.as_deref()
    }

    /// Drops the generating parameters.
    pub fn into_hidden(mut self) -> Self {
        self.params = None;
        self
    }
}

/// Fixed-length feature vector computed from a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryVector {
    pub values: Vec<f64>,
    pub summarizer_id: String,
}

impl SummaryVector {
    pub fn new(values: Vec<f64>, summarizer_id: impl Into<String>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("summary entry".into()));
        }
        Ok(Self {
            values,
            summarizer_id: summarizer_id.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_short_or_mismatched() {
        assert!(Trajectory::new(array![[0.0]], array![[0.0]], 0.1, None).is_err());
        assert!(Trajectory::new(array![[0.0], [1.0]], array![[0.0]], 0.1, None).is_err());
        assert!(Trajectory::new(array![[0.0], [f64::NAN]], array![[0.0], [0.0]], 0.1, None).is_err());
        assert!(Trajectory::new(array![[0.0], [1.0]], array![[0.0], [0.0]], 0.1, None).is_ok());
    }

    #[test]
    fn hiding_drops_params() {
        let t = Trajectory::new(array![[0.0], [1.0]], array![[0.0], [0.0]], 0.1, Some(vec![1.0])).unwrap();
        assert_eq!(t.params(), Some(&[1.0][..]));
        assert_eq!(t.into_hidden().params(), None);
    }
}
