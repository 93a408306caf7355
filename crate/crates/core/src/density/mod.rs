//! Trainable conditional densities `q(θ | summary)`.
//!
//! Two trunks share one full-covariance mixture head: an MLP (MDNN) and a
//! frozen random-Fourier-feature map (MDRFF). Gradients are hand-written and
//! verified against central finite differences by [`grad_check`].

mod checkpoint;
mod gradcheck;
mod head;
mod model;
mod rff;
mod standardizer;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use gradcheck::{grad_check, GradCheckReport, FD_STEP};
pub use head::HeadLayout;
pub use model::{ConditionalDensityModel, INIT_MEAN_SPREAD, INIT_SIGMA};
pub use rff::{median_heuristic, rff_features, RffMap};
pub use standardizer::Standardizer;
pub use train::{train, Dataset, InitMode, TrainConfig, TrainReport, MIN_EXAMPLES_PER_COMPONENT};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output `h`.
    pub fn derivative_from_output(self, h: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - h * h,
            Activation::Relu => {
                if h > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            _ => Err(invalid(format!("unknown activation '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MdnnConfig {
    pub hidden_sizes: Vec<usize>,
    pub activation: Activation,
    pub components: usize,
}

impl Default for MdnnConfig {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![128, 128],
            activation: Activation::Tanh,
            components: 10,
        }
    }
}

/// RBF-kernel random Fourier features feeding the mixture head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdrffConfig {
    pub n_features: usize,
    /// Kernel bandwidth σ; `None` selects the median heuristic at fit time.
    pub bandwidth: Option<f64>,
    pub components: usize,
}

impl Default for MdrffConfig {
    fn default() -> Self {
        Self {
            n_features: 512,
            bandwidth: None,
            components: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "MDNN")]
    Mdnn,
    #[serde(rename = "MDRFF")]
    Mdrff,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mdnn => "MDNN",
            ModelKind::Mdrff => "MDRFF",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MDNN" => Ok(ModelKind::Mdnn),
            "MDRFF" => Ok(ModelKind::Mdrff),
            _ => Err(invalid(format!("unknown model '{s}' (expected MDNN or MDRFF)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ModelConfig {
    #[serde(rename = "MDNN")]
    Mdnn(MdnnConfig),
    #[serde(rename = "MDRFF")]
    Mdrff(MdrffConfig),
}

impl ModelConfig {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelConfig::Mdnn(_) => ModelKind::Mdnn,
            ModelConfig::Mdrff(_) => ModelKind::Mdrff,
        }
    }

    pub fn components(&self) -> usize {
        match self {
            ModelConfig::Mdnn(c) => c.components,
            ModelConfig::Mdrff(c) => c.components,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.components() == 0 {
            return Err(invalid("mixture needs at least one component"));
        }
        match self {
            ModelConfig::Mdnn(c) => {
                if c.hidden_sizes.is_empty() || c.hidden_sizes.contains(&0) {
                    return Err(invalid("MDNN hidden_sizes must be non-empty and positive"));
                }
            }
            ModelConfig::Mdrff(c) => {
                if c.n_features == 0 {
                    return Err(invalid("MDRFF needs n_features >= 1"));
                }
                if let Some(s) = c.bandwidth {
                    if !(s.is_finite() && s > 0.0) {
                        return Err(invalid(format!("MDRFF bandwidth must be positive, got {s}")));
                    }
                }
            }
        }
        Ok(())
    }
}
