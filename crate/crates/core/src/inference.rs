//! Posterior construction from a trained conditional density, importance
//! resampling, 2-D slices and a brute-force ABC rejection oracle.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use serde::{Deserialize, Serialize};

use crate::density::{ConditionalDensityModel, Standardizer};
use crate::error::{invalid, Error, Result};
use crate::math::log_sum_exp;
use crate::mixture::GaussianMixtureDensity;
use crate::prior::{ParamSpace, Prior};
use crate::rng::RandomStream;
use crate::simulators::{rollout_batch, Policy, TaskSpec};
use crate::summarizers::SummarizerSpec;
use crate::trajectory::Trajectory;

/// Minimum number of base draws used by [`Posterior::sample`].
pub const MIN_PROPOSALS: usize = 10_000;
/// Base draws per requested sample.
pub const PROPOSALS_PER_SAMPLE: usize = 50;
pub const MIN_ORACLE_SIMS: usize = 1000;

/// The distribution the training parameters were drawn from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Proposal {
    Prior(Prior),
    /// A fixed mixture density, e.g. an untruncated previous base mixture.
    Mixture(GaussianMixtureDensity),
    /// `w · prior + (1 − w) · posterior`, with the posterior normalized by
    /// `exp(log_z)`. The prior share bounds the importance ratio by `1 / w`.
    Defensive {
        prior_weight: f64,
        prior: Prior,
        posterior: Box<Posterior>,
        log_z: f64,
    },
}

impl Proposal {
    pub fn dim(&self) -> usize {
        match self {
            Proposal::Prior(p) => p.dim(),
            Proposal::Mixture(m) => m.dim(),
            Proposal::Defensive { prior, .. } => prior.dim(),
        }
    }

    pub fn defensive(prior_weight: f64, prior: Prior, posterior: Posterior, log_z: f64) -> Result<Self> {
        if !(prior_weight > 0.0 && prior_weight <= 1.0) {
            return Err(invalid(format!("defensive prior weight must lie in (0, 1], got {prior_weight}")));
        }
        if !log_z.is_finite() {
            return Err(Error::NonFinite("defensive proposal normalizer".into()));
        }
        if posterior.dim() != prior.dim() {
            return Err(Error::DimensionMismatch {
                expected: prior.dim(),
                got: posterior.dim(),
            });
        }
        Ok(Proposal::Defensive {
            prior_weight,
            prior,
            posterior: Box::new(posterior),
            log_z,
        })
    }

    pub fn logpdf(&self, theta: &[f64]) -> Result<f64> {
        match self {
            Proposal::Prior(p) => p.logpdf(theta),
            Proposal::Mixture(m) => m.logpdf(theta),
            Proposal::Defensive {
                prior_weight,
                prior,
                posterior,
                log_z,
            } => {
                let a = prior_weight.ln() + prior.logpdf(theta)?;
                if *prior_weight == 1.0 {
                    return Ok(a);
                }
                let b = (1.0 - prior_weight).ln() + posterior.logpdf_unnorm(theta)? - log_z;
                Ok(log_sum_exp(&[a, b]))
            }
        }
    }
}

/// `p̂(θ | x) ∝ p(θ) / p̃(θ) · q(θ | x)` restricted to the prior's box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    base: GaussianMixtureDensity,
    prior: Prior,
    proposal: Proposal,
    /// Use the defensive proposal's posterior as the prior term, so evidence
    /// from earlier observations carries forward.
    sequential: bool,
}

impl Posterior {
    pub fn new(base: GaussianMixtureDensity, prior: Prior, proposal: Proposal) -> Result<Self> {
        let d = prior.dim();
        for got in [base.dim(), proposal.dim()] {
            if got != d {
                return Err(Error::DimensionMismatch { expected: d, got });
            }
        }
        if let Proposal::Prior(p) | Proposal::Defensive { prior: p, .. } = &proposal {
            if !p.space().covers(prior.space()) {
                return Err(invalid("proposal support does not cover the prior support"));
            }
        }
        Ok(Self {
            base,
            prior,
            proposal,
            sequential: false,
        })
    }

    /// Replaces `p(θ)` by the previous posterior held in a defensive
    /// proposal, turning the result into `p(θ | earlier observations, x)`.
    pub fn sequential(mut self) -> Result<Self> {
        if !matches!(self.proposal, Proposal::Defensive { .. }) {
            return Err(invalid("sequential update needs a defensive proposal holding the previous posterior"));
        }
        self.sequential = true;
        Ok(self)
    }

    pub fn is_sequential(&self) -> bool {
        self.sequential
    }

    pub fn base(&self) -> &GaussianMixtureDensity {
        &self.base
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn proposal(&self) -> &Proposal {
        &self.proposal
    }

    pub fn support(&self) -> &ParamSpace {
        self.prior.space()
    }

    pub fn dim(&self) -> usize {
        self.prior.dim()
    }

    /// Unnormalized log density; `-inf` outside the support.
    pub fn logpdf_unnorm(&self, theta: &[f64]) -> Result<f64> {
        self.support().check_len(theta)?;
        if !self.support().contains(theta) {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.log_ratio(theta)? + self.base.logpdf(theta)?)
    }

    fn log_ratio(&self, theta: &[f64]) -> Result<f64> {
        match &self.proposal {
            Proposal::Prior(p) if *p == self.prior => Ok(0.0),
            Proposal::Defensive {
                prior_weight,
                prior,
                posterior,
                log_z,
            } => {
                // the previous posterior is evaluated once; its own ratio recurses
                let prev = posterior.logpdf_unnorm(theta)? - log_z;
                let lp = prior.logpdf(theta)?;
                let denom = if *prior_weight == 1.0 {
                    lp
                } else {
                    log_sum_exp(&[prior_weight.ln() + lp, (1.0 - prior_weight).ln() + prev])
                };
                let numer = if self.sequential { prev } else { self.prior.logpdf(theta)? };
                Ok(numer - denom)
            }
            _ => Ok(self.prior.logpdf(theta)? - self.proposal.logpdf(theta)?),
        }
    }

    /// Self-normalized importance resampling from the base mixture.
    pub fn sample(&self, stream: &RandomStream, n: usize) -> Result<Array2<f64>> {
        if n == 0 {
            return Err(invalid("posterior sample size must be >= 1"));
        }
        let draws = (PROPOSALS_PER_SAMPLE * n).max(MIN_PROPOSALS);
        let mut rng = stream.rng();
        let proposals = self.base.sample_with(&mut rng, draws);
        let mut survivors = Vec::new();
        let mut log_w = Vec::new();
        for row in proposals.rows() {
            let theta = row.as_slice().expect("row");
            if !self.support().contains(theta) {
                continue;
            }
            let lw = self.log_ratio(theta)?;
            if lw.is_finite() {
                survivors.push(row);
                log_w.push(lw);
            }
        }
        if survivors.len() < n {
            return Err(Error::MassEscapesSupport {
                survivors: survivors.len(),
                draws,
                needed: n,
            });
        }
        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = log_w.iter().map(|lw| (lw - max).exp()).collect();
        let pick = WeightedIndex::new(&weights).map_err(|e| invalid(format!("resampling weights: {e}")))?;
        let mut out = Array2::zeros((n, self.dim()));
        for mut row in out.rows_mut() {
            row.assign(&survivors[pick.sample(&mut rng)]);
        }
        Ok(out)
    }

    /// Monte Carlo estimate of `log ∫ p/p̃ · q` over the support, so that
    /// `logpdf_unnorm − log_normalizer` approximates a normalized density.
    pub fn log_normalizer(&self, stream: &RandomStream, draws: usize) -> Result<f64> {
        if draws == 0 {
            return Err(invalid("log_normalizer needs draws >= 1"));
        }
        let samples = self.base.sample(stream, draws)?;
        let mut terms = Vec::with_capacity(draws);
        for row in samples.rows() {
            let theta = row.as_slice().expect("row");
            if self.support().contains(theta) {
                terms.push(self.log_ratio(theta)?);
            }
        }
        if terms.is_empty() {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(log_sum_exp(&terms) - (draws as f64).ln())
    }

    /// Normalized density of the 2-D base marginal over a `grid × grid`
    /// lattice spanning the bounds of `dims`.
    pub fn slice(&self, dims: (usize, usize), grid: usize) -> Result<PosteriorSlice> {
        if grid < 2 {
            return Err(invalid("slice grid must be at least 2x2"));
        }
        let (a, b) = dims;
        let d = self.dim();
        if a >= d || b >= d {
            return Err(invalid(format!("slice dims {dims:?} out of range for {d} parameters")));
        }
        if a == b {
            return Err(invalid("slice dims must differ"));
        }
        let marginal = self.base.marginal(dims)?;
        let da = &self.support().dims()[a];
        let db = &self.support().dims()[b];
        let xa = Array1::linspace(da.low, da.high, grid);
        let xb = Array1::linspace(db.low, db.high, grid);
        let mut logs = Array2::zeros((grid, grid));
        for (i, &va) in xa.iter().enumerate() {
            for (j, &vb) in xb.iter().enumerate() {
                logs[[i, j]] = marginal.logpdf(&[va, vb])?;
            }
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::NonFinite("posterior slice has no finite density".into()));
        }
        let mut density = logs.mapv(|l: f64| (l - max).exp());
        let total = density.sum();
        density /= total;
        let corrected = match &self.proposal {
            Proposal::Prior(p) => *p == self.prior || (p.is_uniform() && self.prior.is_uniform()),
            Proposal::Mixture(_) | Proposal::Defensive { .. } => false,
        };
        Ok(PosteriorSlice {
            dims,
            names: (da.name.clone(), db.name.clone()),
            axis_a: xa,
            axis_b: xb,
            density,
            ratio_corrected: corrected,
        })
    }
}

/// Rows follow the first dimension, columns the second.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSlice {
    pub dims: (usize, usize),
    pub names: (String, String),
    pub axis_a: Array1<f64>,
    pub axis_b: Array1<f64>,
    pub density: Array2<f64>,
    /// False when the prior/proposal ratio was not constant and was left out.
    pub ratio_corrected: bool,
}

impl PosteriorSlice {
    /// Grid cell nearest to `(a, b)`.
    pub fn cell_of(&self, a: f64, b: f64) -> (usize, usize) {
        (nearest(&self.axis_a, a), nearest(&self.axis_b, b))
    }

    pub fn bounds(&self) -> [(f64, f64); 2] {
        let g = self.axis_a.len() - 1;
        [(self.axis_a[0], self.axis_a[g]), (self.axis_b[0], self.axis_b[g])]
    }
}

fn nearest(axis: &Array1<f64>, v: f64) -> usize {
    let (lo, hi) = (axis[0], axis[axis.len() - 1]);
    let t = ((v - lo) / (hi - lo) * (axis.len() - 1) as f64).round();
    t.clamp(0.0, (axis.len() - 1) as f64) as usize
}

/// Summarizes the hidden-parameter trajectory and conditions the model on it.
pub fn condition(
    model: &ConditionalDensityModel,
    real_traj: &Trajectory,
    spec: &SummarizerSpec,
    prior: &Prior,
    proposal: &Proposal,
) -> Result<Posterior> {
    if real_traj.params().is_some() {
        return Err(invalid("real trajectory must not carry its generating parameters"));
    }
    let id = spec.id();
    let dim = spec.summary_dim(real_traj.state_dim(), real_traj.action_dim(), real_traj.len())?;
    if id != model.summarizer_id() || dim != model.input_dim() {
        return Err(Error::SummarizerMismatch {
            trained: model.summarizer_id().to_owned(),
            trained_dim: model.input_dim(),
            given: id,
            given_dim: dim,
        });
    }
    let summary = spec.summarize(real_traj)?;
    let base = model.forward(&summary)?;
    Posterior::new(base, prior.clone(), proposal.clone())
}

/// Per-column mean and population standard deviation.
pub fn sample_mean_std(samples: &Array2<f64>) -> (Vec<f64>, Vec<f64>) {
    let mean = samples.mean_axis(Axis(0)).map(|m| m.to_vec()).unwrap_or_default();
    let std = samples.std_axis(Axis(0), 0.0).to_vec();
    (mean, std)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AbcResult {
    /// Accepted parameters, closest first.
    pub accepted: Array2<f64>,
    pub distances: Vec<f64>,
    /// Largest accepted distance.
    pub threshold: f64,
    /// Simulations that survived the rollout.
    pub simulated: usize,
}

/// Rejection ABC: simulate prior draws, keep the `quantile` fraction whose
/// standardized summaries lie closest to the real summary.
#[allow(clippy::too_many_arguments)]
pub fn abc_rejection_oracle(
    task: &TaskSpec,
    prior: &Prior,
    policy: &Policy,
    real_traj: &Trajectory,
    spec: &SummarizerSpec,
    stream: &RandomStream,
    n_sims: usize,
    quantile: f64,
) -> Result<AbcResult> {
    if n_sims < MIN_ORACLE_SIMS {
        return Err(invalid(format!("oracle needs n_sims >= {MIN_ORACLE_SIMS}, got {n_sims}")));
    }
    if !(quantile > 0.0 && quantile <= 1.0) {
        return Err(invalid(format!("oracle quantile must lie in (0, 1], got {quantile}")));
    }
    let thetas = prior.sample(&stream.child("sample"), n_sims)?;
    let batch = rollout_batch(task, &thetas, policy, stream, real_traj.len())?;
    let kept = batch.kept_indices(n_sims);
    let f = spec.summary_dim(real_traj.state_dim(), real_traj.action_dim(), real_traj.len())?;
    let mut summaries = Array2::zeros((kept.len(), f));
    for (mut row, traj) in summaries.rows_mut().into_iter().zip(&batch.trajectories) {
        row.assign(&ArrayView1::from(&spec.summarize(traj)?.values));
    }
    let mut standardizer = Standardizer::for_space(prior.space());
    standardizer.fit_inputs(&summaries)?;
    let real = standardizer.standardize_input(ArrayView1::from(&spec.summarize(real_traj)?.values))?;
    let xs = standardizer.standardize_inputs(&summaries)?;
    let mut ranked: Vec<(f64, usize)> = xs
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| ((&row - &real).mapv(|v| v * v).sum().sqrt(), i))
        .filter(|(dist, _)| dist.is_finite())
        .collect();
    if ranked.is_empty() {
        return Err(Error::NonFinite("every ABC distance is non-finite".into()));
    }
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let n_accept = ((quantile * n_sims as f64).round() as usize).clamp(1, ranked.len());
    let rows: Vec<usize> = ranked[..n_accept].iter().map(|&(_, i)| kept[i]).collect();
    Ok(AbcResult {
        accepted: thetas.select(Axis(0), &rows),
        distances: ranked[..n_accept].iter().map(|&(d, _)| d).collect(),
        threshold: ranked[n_accept - 1].0,
        simulated: kept.len(),
    })
}
