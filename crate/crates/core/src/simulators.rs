//! Analytic dynamical systems, data-collection policies and rollouts.
//!
//! Every task integrates its equations of motion with semi-implicit
//! (symplectic) Euler: velocities are updated from the current state, then
//! positions are advanced with the new velocities.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::prior::ParamSpace;
use crate::rng::{RandomStream, StreamRng};
use crate::trajectory::Trajectory;

/// Fraction of failed episodes above which a batch rollout is abandoned.
pub const MAX_FAILED_FRACTION: f64 = 0.1;

pub const DEFAULT_DT: f64 = 0.05;
pub const DEFAULT_EPISODE_LEN: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    Pendulum,
    Cartpole,
    MassSpringDamper,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [TaskKind::Pendulum, TaskKind::Cartpole, TaskKind::MassSpringDamper];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Pendulum => "Pendulum",
            TaskKind::Cartpole => "Cartpole",
            TaskKind::MassSpringDamper => "MassSpringDamper",
        }
    }

    /// Randomizable parameters, in the order `step` reads them.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            TaskKind::Pendulum => &["mass", "length"],
            TaskKind::Cartpole => &["cart_mass", "pole_mass", "pole_length"],
            TaskKind::MassSpringDamper => &["mass", "stiffness", "damping"],
        }
    }

    pub fn default_bounds(self) -> &'static [(f64, f64)] {
        match self {
            TaskKind::Pendulum => &[(0.5, 2.0), (0.3, 1.5)],
            TaskKind::Cartpole => &[(0.5, 2.0), (0.05, 0.5), (0.25, 1.0)],
            TaskKind::MassSpringDamper => &[(0.5, 2.0), (0.5, 5.0), (0.05, 1.0)],
        }
    }

    /// Hidden ground truth used by the surrogate-real environment by default.
    pub fn default_real_params(self) -> &'static [f64] {
        match self {
            TaskKind::Pendulum => &[1.2, 0.7],
            TaskKind::Cartpole => &[1.0, 0.1, 0.5],
            TaskKind::MassSpringDamper => &[1.0, 2.0, 0.3],
        }
    }

    pub fn state_dim(self) -> usize {
        match self {
            TaskKind::Pendulum | TaskKind::MassSpringDamper => 2,
            TaskKind::Cartpole => 4,
        }
    }

    pub fn action_dim(self) -> usize {
        1
    }

    pub fn default_constants(self) -> BTreeMap<String, f64> {
        let mut c = BTreeMap::new();
        c.insert("dt".to_owned(), DEFAULT_DT);
        c.insert("episode_len".to_owned(), DEFAULT_EPISODE_LEN as f64);
        match self {
            TaskKind::Pendulum => {
                c.insert("gravity".to_owned(), 9.81);
                c.insert("damping".to_owned(), 0.1);
                c.insert("action_bound".to_owned(), 2.0);
            }
            TaskKind::Cartpole => {
                c.insert("gravity".to_owned(), 9.81);
                c.insert("action_bound".to_owned(), 10.0);
            }
            TaskKind::MassSpringDamper => {
                c.insert("action_bound".to_owned(), 1.0);
            }
        }
        c
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        TaskKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| invalid(format!("unknown task '{s}' (expected Pendulum, Cartpole or MassSpringDamper)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    kind: TaskKind,
    param_space: ParamSpace,
    constants: BTreeMap<String, f64>,
}

impl TaskSpec {
    pub fn new(kind: TaskKind, param_space: ParamSpace, constants: BTreeMap<String, f64>) -> Result<Self> {
        let names: Vec<&str> = param_space.names().collect();
        if names != kind.param_names() {
            return Err(invalid(format!(
                "{kind} expects parameters {:?} in that order, got {names:?}",
                kind.param_names()
            )));
        }
        for key in kind.default_constants().keys() {
            match constants.get(key) {
                Some(v) if v.is_finite() => {}
                _ => return Err(invalid(format!("{kind} constant '{key}' missing or non-finite"))),
            }
        }
        if let Some(extra) = constants.keys().find(|k| !kind.default_constants().contains_key(*k)) {
            return Err(invalid(format!("{kind} has no constant '{extra}'")));
        }
        let spec = Self {
            kind,
            param_space,
            constants,
        };
        if !(spec.dt() > 0.0) {
            return Err(invalid("dt must be positive"));
        }
        if spec.constant("episode_len") < 2.0 || spec.constant("episode_len").fract() != 0.0 {
            return Err(invalid("episode_len must be an integer >= 2"));
        }
        if !(spec.action_bound() > 0.0) {
            return Err(invalid("action_bound must be positive"));
        }
        Ok(spec)
    }

    /// Task with its built-in bounds and constants.
    pub fn default_for(kind: TaskKind) -> Self {
        let space = ParamSpace::from_bounds(
            kind.param_names()
                .iter()
                .zip(kind.default_bounds())
                .map(|(n, &(lo, hi))| (*n, lo, hi)),
        )
        .expect("built-in bounds are valid");
        Self::new(kind, space, kind.default_constants()).expect("built-in task is valid")
    }

    pub fn kind(&self) -> TaskKind {
        self.kind
    }

    pub fn param_space(&self) -> &ParamSpace {
        &self.param_space
    }

    pub fn constants(&self) -> &BTreeMap<String, f64> {
        &self.constants
    }

    pub fn constant(&self, key: &str) -> f64 {
        self.constants[key]
    }

    pub fn dt(&self) -> f64 {
        self.constant("dt")
    }

    pub fn episode_len(&self) -> usize {
        self.constant("episode_len") as usize
    }

    pub fn action_bound(&self) -> f64 {
        self.constant("action_bound")
    }

    pub fn state_dim(&self) -> usize {
        self.kind.state_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.kind.action_dim()
    }

    fn initial_state(&self, rng: &mut StreamRng) -> Vec<f64> {
        match self.kind {
            TaskKind::Pendulum => {
                let pi = std::f64::consts::PI;
                vec![rng.gen_range(-pi..=pi), 0.0]
            }
            TaskKind::Cartpole => (0..4).map(|_| rng.gen_range(-0.05..=0.05)).collect(),
            TaskKind::MassSpringDamper => vec![1.0, 0.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    /// Each action i.i.d. uniform in the task's action bounds.
    Random,
    /// The same action at every step.
    Fixed { action: Vec<f64> },
}

impl Policy {
    pub fn fixed(task: &TaskSpec, action: Vec<f64>) -> Result<Self> {
        if action.len() != task.action_dim() {
            return Err(Error::DimensionMismatch {
                expected: task.action_dim(),
                got: action.len(),
            });
        }
        let bound = task.action_bound();
        if action.iter().any(|a| !(a.abs() <= bound)) {
            return Err(invalid(format!("fixed action {action:?} outside bounds ±{bound}")));
        }
        Ok(Policy::Fixed { action })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Policy::Random => "random",
            Policy::Fixed { .. } => "fixed",
        }
    }

    fn act(&self, task: &TaskSpec, rng: &mut StreamRng, out: &mut [f64]) {
        match self {
            Policy::Random => {
                let b = task.action_bound();
                for a in out.iter_mut() {
                    *a = rng.gen_range(-b..=b);
                }
            }
            Policy::Fixed { action } => out.copy_from_slice(action),
        }
    }
}

/// Hidden ground-truth parameters of the surrogate-real environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealConfig {
    real_params: BTreeMap<String, f64>,
    episodes: usize,
}

impl RealConfig {
    pub fn new(real_params: BTreeMap<String, f64>, episodes: usize, space: &ParamSpace) -> Result<Self> {
        if episodes == 0 {
            return Err(invalid("realParams needs episodes >= 1"));
        }
        for name in real_params.keys() {
            if space.index_of(name).is_none() {
                return Err(invalid(format!("realParams names unknown parameter '{name}'")));
            }
        }
        for d in space.dims() {
            let v = *real_params
                .get(&d.name)
                .ok_or_else(|| invalid(format!("realParams missing '{}'", d.name)))?;
            if !(v >= d.low && v <= d.high) {
                return Err(invalid(format!(
                    "realParams {}={v} outside prior support [{}, {}]",
                    d.name, d.low, d.high
                )));
            }
        }
        Ok(Self { real_params, episodes })
    }

    pub fn default_for(task: &TaskSpec) -> Result<Self> {
        let params = task
            .kind()
            .param_names()
            .iter()
            .zip(task.kind().default_real_params())
            .map(|(n, v)| ((*n).to_owned(), *v))
            .collect();
        Self::new(params, 1, task.param_space())
    }

    pub fn real_params(&self) -> &BTreeMap<String, f64> {
        &self.real_params
    }

    pub fn episodes(&self) -> usize {
        self.episodes
    }

    /// Parameters as a vector in the space's order.
    pub fn theta(&self, space: &ParamSpace) -> Vec<f64> {
        space.names().map(|n| self.real_params[n]).collect()
    }
}

fn check_theta(task: &TaskSpec, theta: &[f64]) -> Result<()> {
    task.param_space().check_len(theta)?;
    if !task.param_space().contains(theta) {
        return Err(invalid(format!("params {theta:?} outside the task's parameter box")));
    }
    Ok(())
}

/// One integrator step. The action is clipped to the task bounds first.
pub fn step(task: &TaskSpec, theta: &[f64], state: &[f64], action: &[f64]) -> Result<Vec<f64>> {
    check_theta(task, theta)?;
    if state.len() != task.state_dim() {
        return Err(Error::DimensionMismatch {
            expected: task.state_dim(),
            got: state.len(),
        });
    }
    if action.len() != task.action_dim() {
        return Err(Error::DimensionMismatch {
            expected: task.action_dim(),
            got: action.len(),
        });
    }
    if state.iter().chain(action).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("step input".into()));
    }
    let mut next = vec![0.0; state.len()];
    advance(task, theta, state, action, &mut next);
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::DynamicsBlowUp {
            params: theta.to_vec(),
            step: 0,
        });
    }
    Ok(next)
}

fn advance(task: &TaskSpec, theta: &[f64], s: &[f64], action: &[f64], next: &mut [f64]) {
    let dt = task.dt();
    let bound = task.action_bound();
    let u = action[0].clamp(-bound, bound);
    match task.kind {
        TaskKind::Pendulum => {
            let (m, l) = (theta[0], theta[1]);
            let g = task.constant("gravity");
            let c = task.constant("damping");
            let (phi, omega) = (s[0], s[1]);
            let omega_next = omega + dt * (-(g / l) * phi.sin() + u / (m * l * l) - c * omega);
            next[0] = phi + dt * omega_next;
            next[1] = omega_next;
        }
        TaskKind::Cartpole => {
            // pole_length is the pivot-to-centre-of-mass distance
            let (mc, mp, l) = (theta[0], theta[1], theta[2]);
            let g = task.constant("gravity");
            let (x, xd, phi, phid) = (s[0], s[1], s[2], s[3]);
            let (sin, cos) = phi.sin_cos();
            let total = mc + mp;
            let temp = (u + mp * l * phid * phid * sin) / total;
            let phi_acc = (g * sin - cos * temp) / (l * (4.0 / 3.0 - mp * cos * cos / total));
            let x_acc = temp - mp * l * phi_acc * cos / total;
            let xd_next = xd + dt * x_acc;
            let phid_next = phid + dt * phi_acc;
            next[0] = x + dt * xd_next;
            next[1] = xd_next;
            next[2] = phi + dt * phid_next;
            next[3] = phid_next;
        }
        TaskKind::MassSpringDamper => {
            let (m, k, c) = (theta[0], theta[1], theta[2]);
            let (x, v) = (s[0], s[1]);
            let v_next = v + dt * (u - k * x - c * v) / m;
            next[0] = x + dt * v_next;
            next[1] = v_next;
        }
    }
}

/// Simulates one episode of `steps` recorded states.
pub fn rollout(
    task: &TaskSpec,
    theta: &[f64],
    policy: &Policy,
    stream: &RandomStream,
    steps: usize,
) -> Result<Trajectory> {
    rollout_from(task, theta, policy, stream, steps, None)
}

/// Like [`rollout`] but starting from a given state instead of the task's
/// initial distribution.
pub fn rollout_from(
    task: &TaskSpec,
    theta: &[f64],
    policy: &Policy,
    stream: &RandomStream,
    steps: usize,
    initial: Option<&[f64]>,
) -> Result<Trajectory> {
    if steps < 2 {
        return Err(invalid("rollout needs T >= 2"));
    }
    check_theta(task, theta)?;
    if let Policy::Fixed { action } = policy {
        Policy::fixed(task, action.clone())?;
    }
    let (ds, da) = (task.state_dim(), task.action_dim());
    let mut rng = stream.rng();
    let init = task.initial_state(&mut rng);
    let init = match initial {
        Some(s) if s.len() != ds => {
            return Err(Error::DimensionMismatch {
                expected: ds,
                got: s.len(),
            })
        }
        Some(s) => s.to_vec(),
        None => init,
    };
    let mut states = Array2::zeros((steps, ds));
    let mut actions = Array2::zeros((steps, da));
    let mut state = init;
    let mut next = vec![0.0; ds];
    let mut action = vec![0.0; da];
    for t in 0..steps {
        states.row_mut(t).assign(&ArrayView1::from(&state));
        policy.act(task, &mut rng, &mut action);
        actions.row_mut(t).assign(&ArrayView1::from(&action));
        if t + 1 < steps {
            advance(task, theta, &state, &action, &mut next);
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::DynamicsBlowUp {
                    params: theta.to_vec(),
                    step: t,
                });
            }
            std::mem::swap(&mut state, &mut next);
        }
    }
    Trajectory::new(states, actions, task.dt(), Some(theta.to_vec()))
}

#[derive(Clone, Debug)]
pub struct BatchRollout {
    /// Surviving episodes in input order.
    pub trajectories: Vec<Trajectory>,
    /// Input rows whose episode blew up and was dropped.
    pub dropped: Vec<usize>,
}

impl BatchRollout {
    /// Input row index of each surviving trajectory.
    pub fn kept_indices(&self, total: usize) -> Vec<usize> {
        let mut dropped = self.dropped.iter().peekable();
        (0..total)
            .filter(|i| {
                if dropped.peek() == Some(&i) {
                    dropped.next();
                    false
                } else {
                    true
                }
            })
            .collect()
    }
}

/// Rolls out one episode per row of `thetas` in parallel. Episode `i` uses the
/// stream `<base>/rollout/episode/<i>`, so results do not depend on the
/// thread count or execution order.
pub fn rollout_batch(
    task: &TaskSpec,
    thetas: &Array2<f64>,
    policy: &Policy,
    base: &RandomStream,
    steps: usize,
) -> Result<BatchRollout> {
    let n = thetas.nrows();
    if n == 0 {
        return Err(invalid("rollout_batch needs at least one parameter vector"));
    }
    let results: Vec<Result<Trajectory>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let theta = thetas.row(i).to_vec();
            let stream = base.child(format!("rollout/episode/{i}"));
            rollout(task, &theta, policy, &stream, steps)
        })
        .collect();
    let mut trajectories = Vec::with_capacity(n);
    let mut dropped = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(t) => trajectories.push(t),
            Err(Error::DynamicsBlowUp { .. }) => dropped.push(i),
            Err(e) => return Err(e),
        }
    }
    if dropped.len() as f64 > MAX_FAILED_FRACTION * n as f64 {
        return Err(Error::BatchFailed {
            failed: dropped.len(),
            total: n,
        });
    }
    Ok(BatchRollout { trajectories, dropped })
}

/// Surrogate-real episode: a rollout at the hidden parameters with the
/// parameters stripped from the result.
pub fn real_rollout(
    task: &TaskSpec,
    real: &RealConfig,
    policy: &Policy,
    stream: &RandomStream,
    steps: usize,
) -> Result<Trajectory> {
    let theta = real.theta(task.param_space());
    Ok(rollout(task, &theta, policy, stream, steps)?.into_hidden())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn pendulum(damping: f64, dt: f64) -> TaskSpec {
        let mut c = TaskKind::Pendulum.default_constants();
        c.insert("damping".into(), damping);
        c.insert("dt".into(), dt);
        let space = TaskSpec::default_for(TaskKind::Pendulum).param_space().clone();
        TaskSpec::new(TaskKind::Pendulum, space, c).unwrap()
    }

    fn msd(dt: f64, bounds: [(f64, f64); 3]) -> TaskSpec {
        let mut c = TaskKind::MassSpringDamper.default_constants();
        c.insert("dt".into(), dt);
        let space = ParamSpace::from_bounds(
            ["mass", "stiffness", "damping"]
                .into_iter()
                .zip(bounds)
                .map(|(n, (l, h))| (n, l, h)),
        )
        .unwrap();
        TaskSpec::new(TaskKind::MassSpringDamper, space, c).unwrap()
    }

    #[test]
    fn pendulum_fixed_point() {
        let task = pendulum(0.0, 0.05);
        assert_eq!(step(&task, &[1.0, 1.0], &[0.0, 0.0], &[0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn pendulum_quarter_turn() {
        let task = pendulum(0.0, 0.05);
        let next = step(&task, &[1.0, 1.0], &[PI / 2.0, 0.0], &[0.0]).unwrap();
        assert_close!(next[1], -0.4905, 1e-12);
        assert_close!(next[0], 1.546271, 1e-6);
    }

    #[test]
    fn msd_push_from_rest() {
        let task = msd(0.1, [(1.0, 3.0), (0.0, 1.0), (0.0, 1.0)]);
        let next = step(&task, &[2.0, 0.0, 0.0], &[0.0, 0.0], &[1.0]).unwrap();
        assert_close!(next[0], 0.005, 1e-15);
        assert_close!(next[1], 0.05, 1e-15);
    }

    #[test]
    fn step_clips_actions_and_checks_support() {
        let task = pendulum(0.0, 0.05);
        let a = step(&task, &[1.0, 1.0], &[0.0, 0.0], &[50.0]).unwrap();
        let b = step(&task, &[1.0, 1.0], &[0.0, 0.0], &[2.0]).unwrap();
        assert_eq!(a, b);
        assert!(step(&task, &[9.0, 1.0], &[0.0, 0.0], &[0.0]).is_err());
        assert!(step(&task, &[1.0, 1.0], &[f64::NAN, 0.0], &[0.0]).is_err());
    }

    #[test]
    fn cartpole_upright_at_rest_is_fixed() {
        let task = TaskSpec::default_for(TaskKind::Cartpole);
        let next = step(&task, &[1.0, 0.1, 0.5], &[0.0; 4], &[0.0]).unwrap();
        assert_eq!(next, vec![0.0; 4]);
        // pushing right accelerates the cart right and tips the pole left
        let next = step(&task, &[1.0, 0.1, 0.5], &[0.0; 4], &[5.0]).unwrap();
        assert!(next[1] > 0.0 && next[3] < 0.0);
    }

    // ½mv² + ½kx² − ½·dt·k·x·v is exactly conserved by velocity-first symplectic Euler.
    #[test]
    fn undamped_msd_discrete_energy() {
        let (m, k, dt) = (1.3, 2.7, 0.05);
        let task = msd(dt, [(0.5, 2.0), (0.5, 5.0), (0.0, 1.0)]);
        let theta = [m, k, 0.0];
        let energy = |s: &[f64]| 0.5 * m * s[1] * s[1] + 0.5 * k * s[0] * s[0] - 0.5 * dt * k * s[0] * s[1];
        let mut s = vec![1.0, 0.0];
        let e0 = energy(&s);
        for _ in 0..10_000 {
            s = step(&task, &theta, &s, &[0.0]).unwrap();
        }
        assert!(((energy(&s) - e0) / e0).abs() < 1e-6);
    }

    #[test]
    fn small_angle_period() {
        let task = pendulum(0.0, 0.001);
        let (m, l) = (1.0, 0.7);
        let mut s = vec![0.01, 0.0];
        let mut crossings = Vec::new();
        let mut t = 0.0;
        while crossings.len() < 5 {
            let next = step(&task, &[m, l], &s, &[0.0]).unwrap();
            t += 0.001;
            if s[0] > 0.0 && next[0] <= 0.0 {
                // linear interpolation of the downward zero crossing
                crossings.push(t - 0.001 * next[0] / (next[0] - s[0]));
            }
            s = next;
        }
        let measured = (crossings[4] - crossings[0]) / 4.0;
        let expected = 2.0 * PI * (l / 9.81f64).sqrt();
        assert!(((measured - expected) / expected).abs() < 0.02, "{measured} vs {expected}");
    }

    #[test]
    fn fixed_zero_action_stays_at_rest() {
        let task = pendulum(0.1, 0.05);
        let policy = Policy::fixed(&task, vec![0.0]).unwrap();
        let traj = rollout_from(&task, &[1.0, 1.0], &policy, &RandomStream::new(1, "r"), 20, Some(&[0.0, 0.0])).unwrap();
        assert!(traj.states().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rollout_deterministic_and_bounded() {
        let task = TaskSpec::default_for(TaskKind::Pendulum);
        let stream = RandomStream::new(5, "rollout/episode/0");
        let a = rollout(&task, &[1.0, 1.0], &Policy::Random, &stream, 100).unwrap();
        let b = rollout(&task, &[1.0, 1.0], &Policy::Random, &stream, 100).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 100);
        assert!(a.actions().iter().all(|u| u.abs() <= 2.0));
        assert!(a.states().iter().all(|v| v.is_finite()));
        assert_eq!(a.params(), Some(&[1.0, 1.0][..]));
        assert!(rollout(&task, &[1.0, 1.0], &Policy::Random, &stream, 1).is_err());
    }

    #[test]
    fn fixed_policy_must_respect_bounds() {
        let task = TaskSpec::default_for(TaskKind::Pendulum);
        assert!(Policy::fixed(&task, vec![2.5]).is_err());
        assert!(Policy::fixed(&task, vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn batch_matches_sequential_and_thread_count() {
        let task = TaskSpec::default_for(TaskKind::Cartpole);
        let thetas = ndarray::array![[1.0, 0.1, 0.5], [1.5, 0.2, 0.3], [0.6, 0.4, 0.9], [2.0, 0.05, 0.25]];
        let base = RandomStream::new(3, "iter/0");
        let par = rollout_batch(&task, &thetas, &Policy::Random, &base, 50).unwrap();
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| rollout_batch(&task, &thetas, &Policy::Random, &base, 50).unwrap());
        assert_eq!(par.trajectories, one.trajectories);
        for (i, t) in par.trajectories.iter().enumerate() {
            let seq = rollout(
                &task,
                thetas.row(i).as_slice().unwrap(),
                &Policy::Random,
                &base.child(format!("rollout/episode/{i}")),
                50,
            )
            .unwrap();
            assert_eq!(*t, seq);
        }
        assert!(par.dropped.is_empty());
    }

    #[test]
    fn identical_inputs_give_identical_episodes() {
        let task = TaskSpec::default_for(TaskKind::MassSpringDamper);
        let policy = Policy::fixed(&task, vec![0.5]).unwrap();
        let thetas = Array2::from_shape_fn((5, 3), |(_, j)| [1.0, 2.0, 0.3][j]);
        let out = rollout_batch(&task, &thetas, &policy, &RandomStream::new(1, ""), 30).unwrap();
        assert!(out.trajectories.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn batch_drops_rare_blowups_and_fails_on_many() {
        // An explicit integrator step with huge stiffness and tiny mass diverges.
        let mut c = TaskKind::MassSpringDamper.default_constants();
        c.insert("dt".into(), 0.5);
        let space = ParamSpace::from_bounds([("mass", 1e-3, 2.0), ("stiffness", 0.5, 1e6), ("damping", 0.0, 1.0)]).unwrap();
        let task = TaskSpec::new(TaskKind::MassSpringDamper, space, c).unwrap();
        let stable = [1.0, 1.0, 0.1];
        let wild = [1e-3, 1e6, 0.0];
        let mut rows = vec![stable; 19];
        rows.push(wild);
        let thetas = Array2::from_shape_fn((20, 3), |(i, j)| rows[i][j]);
        let out = rollout_batch(&task, &thetas, &Policy::Random, &RandomStream::new(1, ""), 400).unwrap();
        assert_eq!(out.dropped, vec![19]);
        assert_eq!(out.trajectories.len(), 19);
        assert_eq!(out.kept_indices(20), (0..19).collect::<Vec<_>>());

        let mut rows = vec![stable; 17];
        rows.extend([wild; 3]);
        let thetas = Array2::from_shape_fn((20, 3), |(i, j)| rows[i][j]);
        assert!(matches!(
            rollout_batch(&task, &thetas, &Policy::Random, &RandomStream::new(1, ""), 400),
            Err(Error::BatchFailed { failed: 3, total: 20 })
        ));
    }

    #[test]
    fn real_rollout_hides_params() {
        let task = TaskSpec::default_for(TaskKind::Pendulum);
        let real = RealConfig::default_for(&task).unwrap();
        let stream = RandomStream::new(2, "real");
        let r = real_rollout(&task, &real, &Policy::Random, &stream, 40).unwrap();
        assert_eq!(r.params(), None);
        let sim = rollout(&task, &[1.2, 0.7], &Policy::Random, &stream, 40).unwrap();
        assert_eq!(r.states(), sim.states());
        assert_eq!(r.actions(), sim.actions());
    }

    #[test]
    fn real_config_validates_support() {
        let task = TaskSpec::default_for(TaskKind::Pendulum);
        let mut p = BTreeMap::new();
        p.insert("mass".to_owned(), 99.0);
        p.insert("length".to_owned(), 0.7);
        assert!(RealConfig::new(p.clone(), 1, task.param_space()).is_err());
        p.insert("mass".to_owned(), 1.0);
        assert!(RealConfig::new(p.clone(), 1, task.param_space()).is_ok());
        p.insert("bogus".to_owned(), 1.0);
        assert!(RealConfig::new(p, 1, task.param_space()).is_err());
    }

    #[test]
    fn task_names_parse() {
        assert_eq!("pendulum".parse::<TaskKind>().unwrap(), TaskKind::Pendulum);
        assert!("Ant".parse::<TaskKind>().is_err());
    }
}
