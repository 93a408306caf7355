//! The adaptive calibration loop: sample parameters from the current belief,
//! simulate, summarize, train, condition on the surrogate-real episode and
//! replace the belief with the resulting posterior.

pub mod artifacts;
mod config;

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

pub use config::{
    Overrides, RawConfig, RawModel, RawTrain, RunConfig, DEFAULT_LOGDIR, DEFAULT_N_ITERS, DEFAULT_N_SIMS,
    DEFAULT_POSTERIOR_SAMPLES, DEFAULT_PROPOSAL_PRIOR_WEIGHT, DEFAULT_SEED, DEFAULT_SLICE_GRID, DEFAULT_SUMMARIZER,
};

use crate::density::{save_checkpoint, train, ConditionalDensityModel, Dataset, InitMode, TrainConfig};
use crate::error::{Error, Result};
use crate::inference::{abc_rejection_oracle, condition, sample_mean_std, AbcResult, Posterior, Proposal};
use crate::rng::RandomStream;
use crate::simulators::{real_rollout, rollout_batch};
use crate::trajectory::Trajectory;

/// Base draws for the normalizer behind `logpdf_at_truth`.
pub const NORMALIZER_DRAWS: usize = 20_000;

/// Per-iteration posterior-quality scalars; one row of `scalars.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Trajectories that entered training.
    pub n_sims: usize,
    pub n_dropped: usize,
    pub epochs: usize,
    pub best_epoch: usize,
    pub train_nll: f64,
    pub val_nll: f64,
    pub posterior_mean: Vec<f64>,
    pub posterior_std: Vec<f64>,
    /// Normalized posterior log density at the hidden parameters.
    pub logpdf_at_truth: f64,
}

/// Wall-clock seconds per stage; kept out of `scalars.csv`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub iteration: usize,
    pub sample: f64,
    pub rollout: f64,
    pub train: f64,
    pub condition: f64,
    pub artifacts: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub run_name: String,
    pub dir: PathBuf,
    pub records: Vec<IterationRecord>,
    pub timings: Vec<StageTimings>,
    /// Posterior after each iteration.
    pub posteriors: Vec<Posterior>,
    pub model: ConditionalDensityModel,
}

fn stage<T>(name: &'static str, iteration: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage: name,
        iteration,
        source: Box::new(e),
    })
}

fn root_stream(cfg: &RunConfig) -> RandomStream {
    RandomStream::new(cfg.seed, "run")
}

/// The surrogate-real episode observed at `iteration`.
pub fn real_trajectory(cfg: &RunConfig, iteration: usize) -> Result<Trajectory> {
    let root = root_stream(cfg);
    let stream = if cfg.freeze_real {
        root.child("real")
    } else {
        root.child(format!("iter/{iteration}/real"))
    };
    real_rollout(&cfg.task, &cfg.real, &cfg.policy, &stream, cfg.task.episode_len())
}

/// Runs the loop and writes every artifact under `logdir/<run_name>/`.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    let run_name = cfg.run_name();
    let dir = cfg.run_dir();
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config_resolved"), cfg.to_raw().to_yaml()?)?;

    let space = cfg.task.param_space();
    let names: Vec<String> = space.names().map(str::to_owned).collect();
    let truth = cfg.real.theta(space);
    let root = root_stream(cfg);

    let mut records = Vec::new();
    let mut timings = Vec::new();
    let mut posteriors: Vec<Posterior> = Vec::new();
    let mut model: Option<ConditionalDensityModel> = None;
    let mut proposal: Option<Proposal> = None;

    for i in 0..cfg.n_iters {
        let it = root.child(format!("iter/{i}"));
        let mut t = StageTimings {
            iteration: i,
            ..StageTimings::default()
        };

        let clock = Instant::now();
        let thetas = stage("sample", i, draw_parameters(cfg, &it, proposal.as_ref()))?;
        t.sample = clock.elapsed().as_secs_f64();

        let clock = Instant::now();
        let batch = stage(
            "rollout",
            i,
            rollout_batch(&cfg.task, &thetas, &cfg.policy, &it, cfg.task.episode_len()),
        )?;
        let data = stage("summarize", i, Dataset::from_trajectories(&batch.trajectories, &cfg.summarizer))?;
        t.rollout = clock.elapsed().as_secs_f64();

        let clock = Instant::now();
        let (mut m, mode) = match (model.take(), cfg.train.init_mode) {
            (Some(prev), InitMode::Finetune) => (prev, InitMode::Finetune),
            _ => (
                stage(
                    "train",
                    i,
                    ConditionalDensityModel::init(
                        cfg.model.clone(),
                        &data.summaries,
                        space,
                        &data.summarizer_id,
                        &it.child("model"),
                    ),
                )?,
                InitMode::Scratch,
            ),
        };
        let train_cfg = TrainConfig {
            init_mode: mode,
            ..cfg.train.clone()
        };
        let report = stage("train", i, train(&mut m, &data, &train_cfg, &it.child("train")))?;
        t.train = clock.elapsed().as_secs_f64();

        let clock = Instant::now();
        let current = proposal.take().unwrap_or_else(|| Proposal::Prior(cfg.prior.clone()));
        let real = stage("real", i, real_trajectory(cfg, i))?;
        let sequential = matches!(current, Proposal::Defensive { .. }) && !cfg.freeze_real;
        let posterior = stage(
            "condition",
            i,
            condition(&m, &real, &cfg.summarizer, &cfg.prior, &current).and_then(|p| {
                if sequential {
                    p.sequential()
                } else {
                    Ok(p)
                }
            }),
        )?;
        let samples = stage(
            "posterior",
            i,
            posterior.sample(&it.child("posterior"), cfg.n_posterior_samples),
        )?;
        let log_z = stage(
            "posterior",
            i,
            posterior.log_normalizer(&it.child("normalizer"), NORMALIZER_DRAWS),
        )?;
        let logpdf_at_truth = stage("posterior", i, posterior.logpdf_unnorm(&truth))? - log_z;
        t.condition = clock.elapsed().as_secs_f64();

        let clock = Instant::now();
        let (mean, std) = sample_mean_std(&samples);
        records.push(IterationRecord {
            iteration: i,
            n_sims: batch.trajectories.len(),
            n_dropped: batch.dropped.len(),
            epochs: report.epochs_run(),
            best_epoch: report.best_epoch,
            train_nll: report.best_train_nll(),
            val_nll: report.best_val_nll,
            posterior_mean: mean,
            posterior_std: std,
            logpdf_at_truth,
        });
        stage("artifacts", i, write_iteration(cfg, &dir, i, &names, &samples, &posterior, &m))?;
        stage("artifacts", i, artifacts::write_scalars(&dir.join("scalars.csv"), &names, &records))?;
        t.artifacts = clock.elapsed().as_secs_f64();
        timings.push(t);
        stage("artifacts", i, write_timings(&dir, &timings))?;

        proposal = Some(stage(
            "posterior",
            i,
            Proposal::defensive(cfg.proposal_prior_weight, cfg.prior.clone(), posterior.clone(), log_z),
        )?);
        posteriors.push(posterior);
        model = Some(m);
    }

    Ok(RunOutput {
        run_name,
        dir,
        records,
        timings,
        posteriors,
        model: model.expect("n_iters >= 1"),
    })
}

/// Training parameters for one iteration: the prior at first, afterwards
/// the defensive mixture of prior and latest posterior.
fn draw_parameters(cfg: &RunConfig, it: &RandomStream, proposal: Option<&Proposal>) -> Result<Array2<f64>> {
    let n = cfg.n_sims_per_iter;
    let Some(Proposal::Defensive {
        prior_weight, posterior, ..
    }) = proposal
    else {
        return cfg.prior.sample(&it.child("sample"), n);
    };
    let n_prior = (prior_weight * n as f64).round() as usize;
    let mut parts = Vec::new();
    if n_prior > 0 {
        parts.push(cfg.prior.sample(&it.child("sample/prior"), n_prior)?);
    }
    if n_prior < n {
        parts.push(posterior.sample(&it.child("sample/posterior"), n - n_prior)?);
    }
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    ndarray::concatenate(Axis(0), &views).map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn write_iteration(
    cfg: &RunConfig,
    dir: &std::path::Path,
    i: usize,
    names: &[String],
    samples: &Array2<f64>,
    posterior: &Posterior,
    model: &ConditionalDensityModel,
) -> Result<()> {
    artifacts::write_samples(&dir.join(format!("posterior_samples_iter{i}.csv")), names, samples)?;
    for &(a, b) in &cfg.slice_dims {
        let slice = posterior.slice((a, b), cfg.slice_grid)?;
        let file = format!("posterior_slice_iter{i}_{}_{}.csv", names[a], names[b]);
        artifacts::write_slice(&dir.join(file), &slice)?;
    }
    save_checkpoint(model, dir.join(format!("model_iter{i}.ckpt")))
}

fn write_timings(dir: &std::path::Path, timings: &[StageTimings]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(dir.join("timings.csv"))?;
    for t in timings {
        w.serialize(t)?;
    }
    w.flush()?;
    Ok(())
}

/// Rejection-ABC posterior for the iteration-0 real episode of `cfg`.
pub fn oracle(cfg: &RunConfig, n_sims: usize, quantile: f64) -> Result<AbcResult> {
    let real = real_trajectory(cfg, 0)?;
    abc_rejection_oracle(
        &cfg.task,
        &cfg.prior,
        &cfg.policy,
        &real,
        &cfg.summarizer,
        &root_stream(cfg).child("oracle"),
        n_sims,
        quantile,
    )
}
