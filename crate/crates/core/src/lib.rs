//! Likelihood-free inference of simulator parameters from trajectory data.
//!
//! The pipeline samples parameters from a prior, rolls out a simulator,
//! compresses each episode with a trajectory summarizer, trains a
//! conditional Gaussian-mixture density `q(θ | summary)`, and conditions it
//! on an observed episode to obtain a posterior that feeds the next round
//! of domain randomization.

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b): (f64, f64) = ($a, $b);
        assert!((a - b).abs() <= $tol, "{} vs {} (tol {})", a, b, $tol);
    }};
}

pub mod density;
pub mod error;
pub mod inference;
pub mod math;
pub mod mixture;
pub mod pipeline;
pub mod prior;
pub mod rng;
pub mod simulators;
pub mod summarizers;
pub mod trajectory;

pub use error::{Error, Result};
pub use mixture::GaussianMixtureDensity;
pub use prior::{GaussianFactor, ParamDim, ParamSpace, Prior, PriorKind};
pub use rng::RandomStream;
pub use trajectory::{SummaryVector, Trajectory};
