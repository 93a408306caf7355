use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::density::{
    Activation, InitMode, MdnnConfig, MdrffConfig, ModelConfig, ModelKind, TrainConfig,
};
use crate::error::{Error, Result};
use crate::prior::{GaussianFactor, ParamDim, ParamSpace, Prior, PriorKind};
use crate::simulators::{Policy, RealConfig, TaskKind, TaskSpec};
use crate::summarizers::SummarizerSpec;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_N_ITERS: usize = 5;
pub const DEFAULT_N_SIMS: usize = 2000;
pub const DEFAULT_POSTERIOR_SAMPLES: usize = 1000;
pub const DEFAULT_SLICE_GRID: usize = 50;
pub const DEFAULT_LOGDIR: &str = "runs";
pub const DEFAULT_SUMMARIZER: &str = "cross_corr_diff";
pub const DEFAULT_PROPOSAL_PRIOR_WEIGHT: f64 = 0.2;

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// The config file as written: every key optional, unknown keys rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_sims_per_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub episode_len: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub logdir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_mode: Option<InitMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub freeze_real: Option<bool>,
    /// Share of each later iteration's simulations drawn from the prior.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proposal_prior_weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_posterior_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slice_grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slice_dims: Option<Vec<[String; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constants: Option<BTreeMap<String, f64>>,
    /// `name: [low, high]` or `name: [low, high, mean, std]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior: Option<BTreeMap<String, Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub real_params: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub real_episodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_action: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summarizer: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<RawModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<RawTrain>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawModel {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub components: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden_sizes: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub activation: Option<Activation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_features: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTrain {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patience: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grad_clip_norm: Option<f64>,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub task: Option<String>,
    pub seed: Option<u64>,
    pub n_iters: Option<usize>,
    pub model: Option<String>,
    pub summarizer: Option<String>,
    pub policy: Option<String>,
    pub logdir: Option<PathBuf>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Ok(Self::default());
        }
        serde_yaml::from_str::<Option<Self>>(text)
            .map(Option::unwrap_or_default)
            .map_err(|e| config_err(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => config_err(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        if o.task.is_some() {
            self.task.clone_from(&o.task);
        }
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if o.n_iters.is_some() {
            self.n_iters = o.n_iters;
        }
        if let Some(kind) = &o.model {
            self.model.get_or_insert_with(RawModel::default).kind = Some(kind.clone());
        }
        if o.summarizer.is_some() {
            self.summarizer.clone_from(&o.summarizer);
        }
        if o.policy.is_some() {
            self.policy.clone_from(&o.policy);
        }
        if o.logdir.is_some() {
            self.logdir.clone_from(&o.logdir);
        }
    }

    pub fn to_yaml(&self) -> Result<String> {
        serde_yaml::to_string(self).map_err(|e| config_err(e.to_string()))
    }
}

/// A fully resolved and validated run description.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub task: TaskSpec,
    pub prior: Prior,
    pub real: RealConfig,
    pub policy: Policy,
    pub summarizer: SummarizerSpec,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub n_sims_per_iter: usize,
    pub n_iters: usize,
    pub seed: u64,
    pub logdir: PathBuf,
    pub freeze_real: bool,
    pub proposal_prior_weight: f64,
    pub n_posterior_samples: usize,
    pub slice_dims: Vec<(usize, usize)>,
    pub slice_grid: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::resolve(&RawConfig::default()).expect("defaults are valid")
    }
}

impl RunConfig {
    /// Reads a config file; unknown or invalid keys are errors naming the key.
    pub fn from_file(path: impl AsRef<Path>, overrides: &Overrides) -> Result<Self> {
        let mut raw = RawConfig::load(path)?;
        raw.apply(overrides);
        Self::resolve(&raw)
    }

    pub fn for_task(kind: TaskKind) -> Self {
        Self::resolve(&RawConfig {
            task: Some(kind.name().to_owned()),
            ..RawConfig::default()
        })
        .expect("defaults are valid")
    }

    pub fn resolve(raw: &RawConfig) -> Result<Self> {
        let kind: TaskKind = raw.task.as_deref().unwrap_or("Pendulum").parse().map_err(key_err("task"))?;

        let mut constants = kind.default_constants();
        if let Some(c) = &raw.constants {
            for (key, &v) in c {
                if key == "episode_len" {
                    return Err(config_err("constants.episode_len: set the top-level episode_len instead"));
                }
                if !constants.contains_key(key) {
                    return Err(config_err(format!("constants.{key}: {kind} has no such constant")));
                }
                constants.insert(key.clone(), v);
            }
        }
        if let Some(t) = raw.episode_len {
            constants.insert("episode_len".into(), t as f64);
        }

        let (space, prior_kind) = resolve_prior(kind, raw.prior.as_ref())?;
        let task = TaskSpec::new(kind, space.clone(), constants).map_err(key_err("constants"))?;
        let prior = Prior::from_kind(space.clone(), prior_kind).map_err(key_err("prior"))?;

        let mut real_params: BTreeMap<String, f64> = kind
            .param_names()
            .iter()
            .zip(kind.default_real_params())
            .map(|(n, v)| ((*n).to_owned(), *v))
            .collect();
        if let Some(given) = &raw.real_params {
            for (name, &v) in given {
                if !real_params.contains_key(name) {
                    return Err(config_err(format!("real_params.{name}: {kind} has no such parameter")));
                }
                real_params.insert(name.clone(), v);
            }
        }
        let real = RealConfig::new(real_params, raw.real_episodes.unwrap_or(1), &space).map_err(key_err("real_params"))?;

        let policy = match raw.policy.as_deref().unwrap_or("random").to_ascii_lowercase().as_str() {
            "random" => {
                if raw.fixed_action.is_some() {
                    return Err(config_err("fixed_action: only valid with policy: fixed"));
                }
                Policy::Random
            }
            "fixed" => {
                let action = raw
                    .fixed_action
                    .clone()
                    .unwrap_or_else(|| vec![0.5 * task.action_bound(); task.action_dim()]);
                Policy::fixed(&task, action).map_err(key_err("fixed_action"))?
            }
            other => return Err(config_err(format!("policy: unknown policy '{other}' (expected random or fixed)"))),
        };

        let summarizer: SummarizerSpec = raw
            .summarizer
            .as_deref()
            .unwrap_or(DEFAULT_SUMMARIZER)
            .parse()
            .map_err(key_err("summarizer"))?;
        summarizer
            .summary_dim(task.state_dim(), task.action_dim(), task.episode_len())
            .map_err(key_err("summarizer"))?;

        let model = resolve_model(raw.model.as_ref())?;
        let train = resolve_train(raw.train.as_ref(), raw.init_mode)?;

        let n_iters = raw.n_iters.unwrap_or(DEFAULT_N_ITERS);
        if n_iters == 0 {
            return Err(config_err("n_iters: must be >= 1"));
        }
        let n_sims_per_iter = raw.n_sims_per_iter.unwrap_or(DEFAULT_N_SIMS);
        let needed = crate::density::MIN_EXAMPLES_PER_COMPONENT * model.components();
        if n_sims_per_iter < needed {
            return Err(config_err(format!(
                "n_sims_per_iter: {n_sims_per_iter} is below the {needed} needed for {} components",
                model.components()
            )));
        }
        let n_posterior_samples = raw.n_posterior_samples.unwrap_or(DEFAULT_POSTERIOR_SAMPLES);
        if n_posterior_samples == 0 {
            return Err(config_err("n_posterior_samples: must be >= 1"));
        }
        let proposal_prior_weight = raw.proposal_prior_weight.unwrap_or(DEFAULT_PROPOSAL_PRIOR_WEIGHT);
        if !(proposal_prior_weight > 0.0 && proposal_prior_weight <= 1.0) {
            return Err(config_err("proposal_prior_weight: must lie in (0, 1]"));
        }
        let slice_grid = raw.slice_grid.unwrap_or(DEFAULT_SLICE_GRID);
        if slice_grid < 2 {
            return Err(config_err("slice_grid: must be >= 2"));
        }
        let slice_dims = match &raw.slice_dims {
            None => vec![(0, 1)],
            Some(pairs) => pairs
                .iter()
                .map(|[a, b]| {
                    let idx = |n: &str| {
                        space
                            .index_of(n)
                            .ok_or_else(|| config_err(format!("slice_dims: unknown parameter '{n}'")))
                    };
                    let (i, j) = (idx(a)?, idx(b)?);
                    if i == j {
                        return Err(config_err(format!("slice_dims: [{a}, {b}] repeats a parameter")));
                    }
                    Ok((i, j))
                })
                .collect::<Result<_>>()?,
        };

        Ok(Self {
            task,
            prior,
            real,
            policy,
            summarizer,
            model,
            train,
            n_sims_per_iter,
            n_iters,
            seed: raw.seed.unwrap_or(DEFAULT_SEED),
            logdir: raw.logdir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_LOGDIR)),
            freeze_real: raw.freeze_real.unwrap_or(false),
            proposal_prior_weight,
            n_posterior_samples,
            slice_dims,
            slice_grid,
        })
    }

    /// The fully populated file form; resolving it yields `self` again.
    pub fn to_raw(&self) -> RawConfig {
        let space = self.task.param_space();
        let mut constants = self.task.constants().clone();
        constants.remove("episode_len");
        let prior = space
            .dims()
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let v = match self.prior.kind() {
                    PriorKind::Uniform => vec![d.low, d.high],
                    PriorKind::TruncatedGaussian { factors } => {
                        vec![d.low, d.high, factors[i].mean, factors[i].std]
                    }
                };
                (d.name.clone(), v)
            })
            .collect();
        let names: Vec<String> = space.names().map(str::to_owned).collect();
        let model = match &self.model {
            ModelConfig::Mdnn(c) => RawModel {
                kind: Some(ModelKind::Mdnn.name().into()),
                components: Some(c.components),
                hidden_sizes: Some(c.hidden_sizes.clone()),
                activation: Some(c.activation),
                ..RawModel::default()
            },
            ModelConfig::Mdrff(c) => RawModel {
                kind: Some(ModelKind::Mdrff.name().into()),
                components: Some(c.components),
                n_features: Some(c.n_features),
                bandwidth: c.bandwidth,
                ..RawModel::default()
            },
        };
        let t = &self.train;
        RawConfig {
            task: Some(self.task.kind().name().into()),
            seed: Some(self.seed),
            n_iters: Some(self.n_iters),
            n_sims_per_iter: Some(self.n_sims_per_iter),
            episode_len: Some(self.task.episode_len()),
            logdir: Some(self.logdir.clone()),
            init_mode: Some(t.init_mode),
            freeze_real: Some(self.freeze_real),
            proposal_prior_weight: Some(self.proposal_prior_weight),
            n_posterior_samples: Some(self.n_posterior_samples),
            slice_grid: Some(self.slice_grid),
            slice_dims: Some(
                self.slice_dims
                    .iter()
                    .map(|&(a, b)| [names[a].clone(), names[b].clone()])
                    .collect(),
            ),
            constants: Some(constants),
            prior: Some(prior),
            real_params: Some(self.real.real_params().clone()),
            real_episodes: Some(self.real.episodes()),
            policy: Some(self.policy.name().into()),
            fixed_action: match &self.policy {
                Policy::Fixed { action } => Some(action.clone()),
                Policy::Random => None,
            },
            summarizer: Some(self.summarizer.id()),
            model: Some(model),
            train: Some(RawTrain {
                batch_size: Some(t.batch_size),
                learning_rate: Some(t.learning_rate),
                max_epochs: Some(t.max_epochs),
                patience: Some(t.patience),
                validation_fraction: Some(t.validation_fraction),
                grad_clip_norm: Some(t.grad_clip_norm),
            }),
        }
    }

    /// `<Task>_<MODEL>_<summarizer>_<policy>_seed<N>`.
    pub fn run_name(&self) -> String {
        let summarizer: String = self
            .summarizer
            .kind_name()
            .chars()
            .filter(char::is_ascii_alphanumeric)
            .collect::<String>()
            .to_ascii_lowercase();
        format!(
            "{}_{}_{}_{}_seed{}",
            self.task.kind().name(),
            self.model.kind().name(),
            summarizer,
            self.policy.name(),
            self.seed
        )
    }

    pub fn run_dir(&self) -> PathBuf {
        self.logdir.join(self.run_name())
    }
}

fn key_err(key: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Config(msg) => config_err(msg),
        other => config_err(format!("{key}: {other}")),
    }
}

fn resolve_prior(kind: TaskKind, given: Option<&BTreeMap<String, Vec<f64>>>) -> Result<(ParamSpace, PriorKind)> {
    if let Some(unknown) = given.and_then(|g| g.keys().find(|k| !kind.param_names().contains(&k.as_str()))) {
        return Err(config_err(format!("prior.{unknown}: {kind} has no such parameter")));
    }
    let mut dims = Vec::new();
    let mut factors = Vec::new();
    for (name, &(low, high)) in kind.param_names().iter().zip(kind.default_bounds()) {
        match given.and_then(|g| g.get(*name)).map(Vec::as_slice) {
            None => dims.push(ParamDim::new(*name, low, high)),
            Some(&[lo, hi]) => dims.push(ParamDim::new(*name, lo, hi)),
            Some(&[lo, hi, mean, std]) => {
                dims.push(ParamDim::new(*name, lo, hi));
                factors.push((name, GaussianFactor { mean, std }));
            }
            Some(v) => {
                return Err(config_err(format!(
                    "prior.{name}: expected [low, high] or [low, high, mean, std], got {} values",
                    v.len()
                )))
            }
        }
    }
    let space = ParamSpace::new(dims).map_err(key_err("prior"))?;
    let prior_kind = match factors.len() {
        0 => PriorKind::Uniform,
        n if n == space.dim() => PriorKind::TruncatedGaussian {
            factors: factors.into_iter().map(|(_, f)| f).collect(),
        },
        _ => {
            return Err(config_err(
                "prior: give [low, high, mean, std] for every parameter or for none",
            ))
        }
    };
    Ok((space, prior_kind))
}

fn resolve_model(raw: Option<&RawModel>) -> Result<ModelConfig> {
    let raw = raw.cloned().unwrap_or_default();
    let kind: ModelKind = raw.kind.as_deref().unwrap_or("MDNN").parse().map_err(key_err("model.kind"))?;
    let cfg = match kind {
        ModelKind::Mdnn => {
            if raw.n_features.is_some() || raw.bandwidth.is_some() {
                return Err(config_err("model: n_features/bandwidth only apply to MDRFF"));
            }
            let d = MdnnConfig::default();
            ModelConfig::Mdnn(MdnnConfig {
                hidden_sizes: raw.hidden_sizes.unwrap_or(d.hidden_sizes),
                activation: raw.activation.unwrap_or(d.activation),
                components: raw.components.unwrap_or(d.components),
            })
        }
        ModelKind::Mdrff => {
            if raw.hidden_sizes.is_some() || raw.activation.is_some() {
                return Err(config_err("model: hidden_sizes/activation only apply to MDNN"));
            }
            let d = MdrffConfig::default();
            ModelConfig::Mdrff(MdrffConfig {
                n_features: raw.n_features.unwrap_or(d.n_features),
                bandwidth: raw.bandwidth.or(d.bandwidth),
                components: raw.components.unwrap_or(d.components),
            })
        }
    };
    cfg.validate().map_err(key_err("model"))?;
    Ok(cfg)
}

fn resolve_train(raw: Option<&RawTrain>, init_mode: Option<InitMode>) -> Result<TrainConfig> {
    let raw = raw.cloned().unwrap_or_default();
    let d = TrainConfig::default();
    let cfg = TrainConfig {
        batch_size: raw.batch_size.unwrap_or(d.batch_size),
        learning_rate: raw.learning_rate.unwrap_or(d.learning_rate),
        max_epochs: raw.max_epochs.unwrap_or(d.max_epochs),
        patience: raw.patience.unwrap_or(d.patience),
        validation_fraction: raw.validation_fraction.unwrap_or(d.validation_fraction),
        grad_clip_norm: raw.grad_clip_norm.unwrap_or(d.grad_clip_norm),
        init_mode: init_mode.unwrap_or(d.init_mode),
    };
    cfg.validate().map_err(key_err("train"))?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::resolve(&RawConfig::parse("").unwrap()).unwrap();
        assert_eq!(cfg.n_sims_per_iter, 2000);
        assert_eq!(cfg.n_iters, 5);
        assert_eq!(cfg.task.kind(), TaskKind::Pendulum);
        assert_eq!(cfg, RunConfig::resolve(&RawConfig::parse("# nothing\n").unwrap()).unwrap());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RawConfig::parse("n_sims_per_itr: 10\n").unwrap_err().to_string();
        assert!(err.contains("n_sims_per_itr"), "{err}");
        let err = RawConfig::parse("model:\n  kind: MDNN\n  layers: 3\n").unwrap_err().to_string();
        assert!(err.contains("layers"), "{err}");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = RawConfig::parse("seed: 1\nn_iters: [\n").unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn out_of_support_truth_is_rejected() {
        let raw = RawConfig::parse("real_params:\n  mass: 99\n").unwrap();
        let err = RunConfig::resolve(&raw).unwrap_err().to_string();
        assert!(err.contains("real_params") && err.contains("mass"), "{err}");
    }

    #[test]
    fn resolved_config_round_trips() {
        let text = "task: cartpole\nseed: 7\npolicy: fixed\nsummarizer: signature\nprior:\n  pole_mass: [0.05, 0.5, 0.1, 0.2]\n  cart_mass: [0.5, 2.0, 1.0, 1.0]\n  pole_length: [0.25, 1.0, 0.5, 0.5]\nmodel:\n  kind: mdrff\n  n_features: 64\ntrain:\n  patience: 3\nconstants:\n  gravity: 9.8\n";
        let cfg = RunConfig::resolve(&RawConfig::parse(text).unwrap()).unwrap();
        assert!(!cfg.prior.is_uniform());
        let again = RunConfig::resolve(&RawConfig::parse(&cfg.to_raw().to_yaml().unwrap()).unwrap()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.run_name(), "Cartpole_MDRFF_signature_fixed_seed7");
    }

    #[test]
    fn overrides_take_precedence() {
        let mut raw = RawConfig::parse("task: Pendulum\nseed: 1\nmodel:\n  components: 3\n").unwrap();
        raw.apply(&Overrides {
            task: Some("MassSpringDamper".into()),
            seed: Some(9),
            model: Some("MDRFF".into()),
            ..Overrides::default()
        });
        let cfg = RunConfig::resolve(&raw).unwrap();
        assert_eq!(cfg.task.kind(), TaskKind::MassSpringDamper);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.model.kind(), ModelKind::Mdrff);
        assert_eq!(cfg.model.components(), 3);
    }

    #[test]
    fn invalid_values_name_their_key() {
        for (text, key) in [
            ("n_iters: 0\n", "n_iters"),
            ("proposal_prior_weight: 0\n", "proposal_prior_weight"),
            ("prior:\n  mass: [1.0]\n", "prior.mass"),
            ("prior:\n  gravity: [1.0, 2.0]\n", "prior.gravity"),
            ("constants:\n  friction: 1.0\n", "constants.friction"),
            ("policy: greedy\n", "policy"),
            ("summarizer: fourier\n", "summarizer"),
            ("model:\n  kind: MDNN\n  n_features: 5\n", "model"),
            ("train:\n  batch_size: 0\n", "train"),
            ("slice_dims: [[mass, mass]]\n", "slice_dims"),
        ] {
            let err = RawConfig::parse(text).and_then(|r| RunConfig::resolve(&r)).unwrap_err().to_string();
            assert!(err.contains(key), "{text:?}: {err}");
        }
    }
}
