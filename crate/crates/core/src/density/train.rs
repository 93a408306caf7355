use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::ConditionalDensityModel;
use crate::error::{invalid, Error, Result};
use crate::rng::RandomStream;
use crate::summarizers::SummarizerSpec;
use crate::trajectory::Trajectory;

/// Minimum training examples per mixture component.
pub const MIN_EXAMPLES_PER_COMPONENT: usize = 10;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Redraw the weights before training.
    Scratch,
    /// Continue from the current weights.
    Finetune,
}

impl std::str::FromStr for InitMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scratch" => Ok(InitMode::Scratch),
            "finetune" => Ok(InitMode::Finetune),
            _ => Err(invalid(format!("unknown init_mode '{s}' (expected scratch or finetune)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement tolerated before stopping.
    pub patience: usize,
    pub validation_fraction: f64,
    pub grad_clip_norm: f64,
    pub init_mode: InitMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 256,
            learning_rate: 1e-3,
            max_epochs: 500,
            patience: 20,
            validation_fraction: 0.1,
            grad_clip_norm: 10.0,
            init_mode: InitMode::Scratch,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be positive"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(invalid("learning_rate must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(invalid("max_epochs must be positive"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 0.5) {
            return Err(invalid("validation_fraction must lie in (0, 0.5)"));
        }
        if !(self.grad_clip_norm > 0.0) {
            return Err(invalid("grad_clip_norm must be positive"));
        }
        Ok(())
    }
}

/// Paired summaries and generating parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub summarizer_id: String,
    pub summaries: Array2<f64>,
    pub thetas: Array2<f64>,
}

impl Dataset {
    pub fn new(summarizer_id: impl Into<String>, summaries: Array2<f64>, thetas: Array2<f64>) -> Result<Self> {
        if summaries.nrows() != thetas.nrows() {
            return Err(invalid("summaries and thetas have different row counts"));
        }
        Ok(Self {
            summarizer_id: summarizer_id.into(),
            summaries,
            thetas,
        })
    }

    /// Summarizes simulated trajectories; each must carry its parameters.
    pub fn from_trajectories(trajs: &[Trajectory], spec: &SummarizerSpec) -> Result<Self> {
        let first = trajs.first().ok_or_else(|| invalid("no trajectories to summarize"))?;
        let f = spec.summary_dim(first.state_dim(), first.action_dim(), first.len())?;
        let d = first
            .params()
            .ok_or_else(|| invalid("simulated trajectory lacks parameters"))?
            .len();
        let mut summaries = Array2::zeros((trajs.len(), f));
        let mut thetas = Array2::zeros((trajs.len(), d));
        for (i, t) in trajs.iter().enumerate() {
            let s = spec.summarize(t)?;
            if s.len() != f {
                return Err(Error::DimensionMismatch { expected: f, got: s.len() });
            }
            summaries.row_mut(i).assign(&ndarray::ArrayView1::from(&s.values));
            let p = t.params().ok_or_else(|| invalid("simulated trajectory lacks parameters"))?;
            thetas.row_mut(i).assign(&ndarray::ArrayView1::from(p));
        }
        Self::new(spec.id(), summaries, thetas)
    }

    pub fn len(&self) -> usize {
        self.summaries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean mini-batch NLL per epoch.
    pub train_nll: Vec<f64>,
    /// Full validation NLL per epoch.
    pub val_nll: Vec<f64>,
    pub initial_val_nll: f64,
    /// Index into `val_nll` of the restored snapshot.
    pub best_epoch: usize,
    pub best_val_nll: f64,
    pub stopped_early: bool,
    pub skipped_batches: usize,
}

impl TrainReport {
    pub fn epochs_run(&self) -> usize {
        self.val_nll.len()
    }

    /// Train NLL at the restored snapshot.
    pub fn best_train_nll(&self) -> f64 {
        self.train_nll[self.best_epoch]
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    fn new(n: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
        }
    }
}

fn clip(grad: &mut [f64], max_norm: f64) {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
}

/// Mini-batch Adam on the mean NLL with gradient clipping and early stopping
/// on validation NLL. The model ends at the best-validation snapshot.
pub fn train(
    model: &mut ConditionalDensityModel,
    data: &Dataset,
    cfg: &TrainConfig,
    stream: &RandomStream,
) -> Result<TrainReport> {
    cfg.validate()?;
    let n = data.len();
    let guard = MIN_EXAMPLES_PER_COMPONENT * model.components();
    if n < guard {
        return Err(invalid(format!(
            "training needs at least {guard} examples for {} components, got {n}",
            model.components()
        )));
    }
    if data.summarizer_id != model.summarizer_id() {
        return Err(Error::SummarizerMismatch {
            trained: model.summarizer_id().to_owned(),
            trained_dim: model.input_dim(),
            given: data.summarizer_id.clone(),
            given_dim: data.summaries.ncols(),
        });
    }
    if cfg.init_mode == InitMode::Scratch {
        model.reinitialize(&stream.child("init"));
    }
    let (xs, ys) = model.standardized_data(&data.summaries, &data.thetas)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream.child("split").rng());
    let n_val = ((n as f64 * cfg.validation_fraction).round() as usize).clamp(1, n - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let val_x = xs.select(Axis(0), val_idx);
    let val_y = ys.select(Axis(0), val_idx);
    let mut train_idx = train_idx.to_vec();

    let eval_val = |m: &ConditionalDensityModel| -> f64 {
        m.loss_standardized(&val_x, &val_y, false)
            .map(|(l, _)| l)
            .unwrap_or(f64::INFINITY)
    };

    let initial_val_nll = eval_val(model);
    let mut adam = Adam::new(model.n_parameters(), cfg.learning_rate);
    let mut best = (f64::INFINITY, 0usize, model.parameters().to_vec());
    let mut stale = 0;
    let mut report = TrainReport {
        train_nll: Vec::new(),
        val_nll: Vec::new(),
        initial_val_nll,
        best_epoch: 0,
        best_val_nll: f64::INFINITY,
        stopped_early: false,
        skipped_batches: 0,
    };

    for epoch in 0..cfg.max_epochs {
        train_idx.shuffle(&mut stream.child(format!("epoch/{epoch}")).rng());
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        let mut skipped = 0usize;
        for chunk in train_idx.chunks(cfg.batch_size) {
            let bx = xs.select(Axis(0), chunk);
            let by = ys.select(Axis(0), chunk);
            match model.loss_standardized(&bx, &by, true) {
                Ok((loss, mut grad)) if grad.iter().all(|g| g.is_finite()) => {
                    clip(&mut grad, cfg.grad_clip_norm);
                    adam.step(model.parameters_mut(), &grad);
                    loss_sum += loss * chunk.len() as f64;
                    seen += chunk.len();
                }
                Ok(_) | Err(Error::NonFiniteLoss { .. }) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
        report.skipped_batches += skipped;
        if seen == 0 {
            return Err(Error::TrainingDiverged { epoch });
        }
        let val = eval_val(model);
        report.train_nll.push(loss_sum / seen as f64);
        report.val_nll.push(val);
        if val < best.0 {
            best = (val, epoch, model.parameters().to_vec());
            stale = 0;
        } else {
            stale += 1;
            if stale > cfg.patience {
                report.stopped_early = true;
                break;
            }
        }
    }
    if !best.0.is_finite() {
        return Err(Error::TrainingDiverged {
            epoch: report.epochs_run().saturating_sub(1),
        });
    }
    model.parameters_mut().copy_from_slice(&best.2);
    report.best_val_nll = best.0;
    report.best_epoch = best.1;
    Ok(report)
}
