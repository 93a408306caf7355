//! Bounded parameter spaces and factorized priors over them.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};
use crate::rng::RandomStream;

/// Proposals drawn per dimension when estimating truncated-Gaussian acceptance.
pub const ACCEPTANCE_PROBE: usize = 10_000;
pub const MIN_ACCEPTANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamDim {
    pub name: String,
    pub low: f64,
    pub high: f64,
}

impl ParamDim {
    pub fn new(name: impl Into<String>, low: f64, high: f64) -> Self {
        Self {
            name: name.into(),
            low,
            high,
        }
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }
}

/// Ordered, named box of simulation parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ParamDim>", into = "Vec<ParamDim>")]
pub struct ParamSpace {
    dims: Vec<ParamDim>,
}

impl ParamSpace {
    pub fn new(dims: Vec<ParamDim>) -> Result<Self> {
        if dims.is_empty() {
            return Err(invalid("parameter space needs at least one dimension"));
        }
        for (i, d) in dims.iter().enumerate() {
            if d.name.is_empty() {
                return Err(invalid(format!("parameter {i} has an empty name")));
            }
            if !(d.low.is_finite() && d.high.is_finite() && d.low < d.high) {
                return Err(invalid(format!(
                    "parameter '{}' needs finite low < high, got [{}, {}]",
                    d.name, d.low, d.high
                )));
            }
            if dims[..i].iter().any(|o| o.name == d.name) {
                return Err(invalid(format!("duplicate parameter name '{}'", d.name)));
            }
        }
        Ok(Self { dims })
    }

    /// Convenience constructor from `(name, low, high)` triples.
    pub fn from_bounds<S: Into<String>>(bounds: impl IntoIterator<Item = (S, f64, f64)>) -> Result<Self> {
        Self::new(
            bounds
                .into_iter()
                .map(|(name, low, high)| ParamDim {
                    name: name.into(),
                    low,
                    high,
                })
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[ParamDim] {
        &self.dims
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.dims.iter().map(|d| d.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.dims.iter().position(|d| d.name == name)
    }

    /// Closed-box membership: the bounds themselves are in support.
    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dims.len()
            && self
                .dims
                .iter()
                .zip(theta)
                .all(|(d, &t)| t >= d.low && t <= d.high)
    }

    pub fn log_volume(&self) -> f64 {
        self.dims.iter().map(|d| d.width().ln()).sum()
    }

    /// True when this box contains `other` entirely.
    pub fn covers(&self, other: &ParamSpace) -> bool {
        self.dims.len() == other.dims.len()
            && self
                .dims
                .iter()
                .zip(&other.dims)
                .all(|(a, b)| a.low <= b.low && a.high >= b.high)
    }

    pub(crate) fn check_len(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dims.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dims.len(),
                got: theta.len(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<ParamDim>> for ParamSpace {
    type Error = Error;
    fn try_from(dims: Vec<ParamDim>) -> Result<Self> {
        Self::new(dims)
    }
}

impl From<ParamSpace> for Vec<ParamDim> {
    fn from(space: ParamSpace) -> Self {
        space.dims
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianFactor {
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorKind {
    Uniform,
    /// One (mean, std) per dimension, truncated to the box.
    TruncatedGaussian { factors: Vec<GaussianFactor> },
}

/// Factorized prior on the support box of a [`ParamSpace`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PriorRepr", into = "PriorRepr")]
pub struct Prior {
    space: ParamSpace,
    kind: PriorKind,
    /// Per-dim log of the Gaussian mass inside the box (truncated kind only).
    log_mass: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PriorRepr {
    space: ParamSpace,
    #[serde(flatten)]
    kind: PriorKind,
}

impl TryFrom<PriorRepr> for Prior {
    type Error = Error;
    fn try_from(r: PriorRepr) -> Result<Self> {
        Prior::from_kind(r.space, r.kind)
    }
}

impl From<Prior> for PriorRepr {
    fn from(p: Prior) -> Self {
        PriorRepr {
            space: p.space,
            kind: p.kind,
        }
    }
}

impl Prior {
    pub fn uniform(space: ParamSpace) -> Self {
        Self {
            space,
            kind: PriorKind::Uniform,
            log_mass: Vec::new(),
        }
    }

    pub fn truncated_gaussian(space: ParamSpace, factors: Vec<GaussianFactor>) -> Result<Self> {
        if factors.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                got: factors.len(),
            });
        }
        if let Some(f) = factors
            .iter()
            .find(|f| !(f.mean.is_finite() && f.std.is_finite() && f.std > 0.0))
        {
            return Err(invalid(format!(
                "truncated gaussian needs finite mean and std > 0, got ({}, {})",
                f.mean, f.std
            )));
        }
        let mut prior = Self {
            space,
            kind: PriorKind::TruncatedGaussian { factors },
            log_mass: Vec::new(),
        };
        prior.log_mass = prior.compute_log_mass();
        Ok(prior)
    }

    pub fn from_kind(space: ParamSpace, kind: PriorKind) -> Result<Self> {
        match kind {
            PriorKind::Uniform => Ok(Self::uniform(space)),
            PriorKind::TruncatedGaussian { factors } => Self::truncated_gaussian(space, factors),
        }
    }

    fn compute_log_mass(&self) -> Vec<f64> {
        match &self.kind {
            PriorKind::Uniform => Vec::new(),
            PriorKind::TruncatedGaussian { factors } => self
                .space
                .dims()
                .iter()
                .zip(factors)
                .map(|(d, f)| {
                    let n = Normal::new(f.mean, f.std).expect("validated factor");
                    (n.cdf(d.high) - n.cdf(d.low)).ln()
                })
                .collect(),
        }
    }

    pub fn space(&self) -> &ParamSpace {
        &self.space
    }

    pub fn kind(&self) -> &PriorKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.kind, PriorKind::Uniform)
    }

    /// `log p(θ)`; `-inf` outside the closed support box.
    pub fn logpdf(&self, theta: &[f64]) -> Result<f64> {
        self.space.check_len(theta)?;
        if !self.space.contains(theta) {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(match &self.kind {
            PriorKind::Uniform => -self.space.log_volume(),
            PriorKind::TruncatedGaussian { factors } => {
                factors
                    .iter()
                    .zip(theta)
                    .zip(&self.log_mass)
                    .map(|((f, &t), &lm)| {
                        let z = (t - f.mean) / f.std;
                        -0.5 * z * z - f.std.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - lm
                    })
                    .sum()
            }
        })
    }

    /// `n` draws, one per row, all inside the support box.
    pub fn sample(&self, stream: &RandomStream, n: usize) -> Result<Array2<f64>> {
        if n == 0 {
            return Err(invalid("prior_sample needs n >= 1"));
        }
        let d = self.dim();
        let mut out = Array2::zeros((n, d));
        let mut rng = stream.rng();
        match &self.kind {
            PriorKind::Uniform => {
                for mut row in out.rows_mut() {
                    for (x, dim) in row.iter_mut().zip(self.space.dims()) {
                        *x = rng.gen_range(dim.low..=dim.high);
                    }
                }
            }
            PriorKind::TruncatedGaussian { factors } => {
                let mut probe = stream.child("acceptance").rng();
                for (dim, f) in self.space.dims().iter().zip(factors) {
                    let accepted = (0..ACCEPTANCE_PROBE)
                        .filter(|_| {
                            let z: f64 = probe.sample(StandardNormal);
                            let x = f.mean + f.std * z;
                            x >= dim.low && x <= dim.high
                        })
                        .count();
                    if (accepted as f64 / ACCEPTANCE_PROBE as f64) < MIN_ACCEPTANCE {
                        return Err(Error::DegenerateTruncation {
                            dim: dim.name.clone(),
                            proposals: ACCEPTANCE_PROBE,
                        });
                    }
                }
                // The box is a product set, so per-dimension rejection is
                // equivalent to rejecting whole vectors.
                for mut row in out.rows_mut() {
                    for ((x, dim), f) in row.iter_mut().zip(self.space.dims()).zip(factors) {
                        *x = loop {
                            let z: f64 = rng.sample(StandardNormal);
                            let v = f.mean + f.std * z;
                            if v >= dim.low && v <= dim.high {
                                break v;
                            }
                        };
                    }
                }
            }
        }
        Ok(out)
    }
}
