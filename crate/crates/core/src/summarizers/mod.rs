//! Trajectory summarizers: fixed-length feature maps over episodes.

mod signature;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use signature::{PathSignature, MAX_DEPTH};

use crate::error::{invalid, Error, Result};
use crate::trajectory::{SummaryVector, Trajectory};

pub const DEFAULT_START_STEPS: usize = 10;
pub const DEFAULT_STRIDE: usize = 10;
pub const DEFAULT_SIGNATURE_DEPTH: usize = 3;
pub const DEFAULT_LAGS: usize = 5;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SummarizerSpec {
    /// The first `n_steps` states and actions.
    Start { n_steps: usize },
    /// States and actions at `t = 0, stride, 2·stride, …`.
    Waypoints { stride: usize },
    /// Truncated signature of the state path, optionally with a time channel.
    Signature { depth: usize, time_augment: bool },
    /// Lagged action/state cross-correlations plus state means and variances.
    CrossCorr { n_lags: usize },
    /// As `CrossCorr`, over state differences.
    CrossCorrDiff { n_lags: usize },
}

impl SummarizerSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SummarizerSpec::Start { n_steps } if n_steps == 0 => Err(invalid("start needs n_steps >= 1")),
            SummarizerSpec::Waypoints { stride } if stride == 0 => Err(invalid("waypoints needs stride >= 1")),
            SummarizerSpec::Signature { depth, .. } if !(1..=MAX_DEPTH).contains(&depth) => Err(invalid(format!(
                "signature depth must be in 1..={MAX_DEPTH}, got {depth}"
            ))),
            SummarizerSpec::CrossCorr { n_lags } | SummarizerSpec::CrossCorrDiff { n_lags } if n_lags == 0 => {
                Err(invalid("cross-correlation needs n_lags >= 1"))
            }
            _ => Ok(()),
        }
    }

    /// Default parameters for a summarizer named by kind.
    pub fn default_for(kind: &str) -> Result<Self> {
        Ok(match kind.to_ascii_lowercase().as_str() {
            "start" => SummarizerSpec::Start {
                n_steps: DEFAULT_START_STEPS,
            },
            "waypoints" => SummarizerSpec::Waypoints { stride: DEFAULT_STRIDE },
            "signature" | "signatory" => SummarizerSpec::Signature {
                depth: DEFAULT_SIGNATURE_DEPTH,
                time_augment: true,
            },
            "cross_corr" | "cross_correlation" | "crosscorr" => SummarizerSpec::CrossCorr { n_lags: DEFAULT_LAGS },
            "cross_corr_diff" | "cross_corr_difference" | "crosscorrdiff" => {
                SummarizerSpec::CrossCorrDiff { n_lags: DEFAULT_LAGS }
            }
            other => return Err(invalid(format!("unknown summarizer '{other}'"))),
        })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            SummarizerSpec::Start { .. } => "start",
            SummarizerSpec::Waypoints { .. } => "waypoints",
            SummarizerSpec::Signature { .. } => "signature",
            SummarizerSpec::CrossCorr { .. } => "cross_corr",
            SummarizerSpec::CrossCorrDiff { .. } => "cross_corr_diff",
        }
    }

    /// `<kind>[:<param>=<value>,...]`
    pub fn id(&self) -> String {
        match *self {
            SummarizerSpec::Start { n_steps } => format!("start:n_steps={n_steps}"),
            SummarizerSpec::Waypoints { stride } => format!("waypoints:stride={stride}"),
            SummarizerSpec::Signature { depth, time_augment } => {
                format!("signature:depth={depth},time_augment={time_augment}")
            }
            SummarizerSpec::CrossCorr { n_lags } => format!("cross_corr:n_lags={n_lags}"),
            SummarizerSpec::CrossCorrDiff { n_lags } => format!("cross_corr_diff:n_lags={n_lags}"),
        }
    }

    /// Output length for trajectories with `ds` state dims, `da` action dims and `t` steps.
    pub fn summary_dim(&self, ds: usize, da: usize, t: usize) -> Result<usize> {
        self.validate()?;
        Ok(match *self {
            SummarizerSpec::Start { n_steps } => {
                if n_steps > t {
                    return Err(invalid(format!("start n_steps={n_steps} exceeds T={t}")));
                }
                n_steps * (ds + da)
            }
            SummarizerSpec::Waypoints { stride } => {
                if stride > t {
                    return Err(invalid(format!("waypoints stride={stride} exceeds T={t}")));
                }
                t.div_ceil(stride) * (ds + da)
            }
            SummarizerSpec::Signature { depth, time_augment } => {
                if t < 2 {
                    return Err(invalid("signature needs T >= 2"));
                }
                PathSignature::flat_len(ds + usize::from(time_augment), depth)
            }
            SummarizerSpec::CrossCorr { n_lags } | SummarizerSpec::CrossCorrDiff { n_lags } => {
                if n_lags + 1 > t {
                    return Err(invalid(format!("n_lags={n_lags} needs T >= {}", n_lags + 1)));
                }
                ds * da * n_lags + 2 * ds
            }
        })
    }

    pub fn summarize(&self, traj: &Trajectory) -> Result<SummaryVector> {
        self.validate()?;
        let values = match *self {
            SummarizerSpec::Start { n_steps } => start_features(traj, n_steps)?,
            SummarizerSpec::Waypoints { stride } => waypoint_features(traj, stride)?,
            SummarizerSpec::Signature { depth, time_augment } => signature_features(traj, depth, time_augment)?,
            SummarizerSpec::CrossCorr { n_lags } => crosscorr_features(traj, n_lags, false)?,
            SummarizerSpec::CrossCorrDiff { n_lags } => crosscorr_features(traj, n_lags, true)?,
        };
        SummaryVector::new(values, self.id())
    }
}

impl fmt::Display for SummarizerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for SummarizerSpec {
    type Err = Error;

    /// Accepts a bare kind (`cross_corr_difference`) or a full id
    /// (`signature:depth=2,time_augment=false`).
    fn from_str(s: &str) -> Result<Self> {
        let (kind, params) = match s.split_once(':') {
            Some((k, p)) => (k.trim(), p.trim()),
            None => (s.trim(), ""),
        };
        let mut spec = SummarizerSpec::default_for(kind)?;
        for pair in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| invalid(format!("summarizer parameter '{pair}' is not key=value")))?;
            let (key, value) = (key.trim(), value.trim());
            let as_count = || {
                value
                    .parse::<usize>()
                    .map_err(|_| invalid(format!("summarizer parameter {key}={value} is not a count")))
            };
            match (&mut spec, key) {
                (SummarizerSpec::Start { n_steps }, "n_steps") => *n_steps = as_count()?,
                (SummarizerSpec::Waypoints { stride }, "stride") => *stride = as_count()?,
                (SummarizerSpec::Signature { depth, .. }, "depth") => *depth = as_count()?,
                (SummarizerSpec::Signature { time_augment, .. }, "time_augment") => {
                    *time_augment = value
                        .parse()
                        .map_err(|_| invalid(format!("time_augment={value} is not a boolean")))?
                }
                (SummarizerSpec::CrossCorr { n_lags } | SummarizerSpec::CrossCorrDiff { n_lags }, "n_lags") => {
                    *n_lags = as_count()?
                }
                _ => return Err(invalid(format!("summarizer {kind} has no parameter '{key}'"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// `[s₀, a₀, s₁, a₁, …, s_{n−1}, a_{n−1}]`.
pub fn summarize_start(traj: &Trajectory, n_steps: usize) -> Result<SummaryVector> {
    SummarizerSpec::Start { n_steps }.summarize(traj)
}

pub fn summarize_waypoints(traj: &Trajectory, stride: usize) -> Result<SummaryVector> {
    SummarizerSpec::Waypoints { stride }.summarize(traj)
}

pub fn summarize_signature(traj: &Trajectory, depth: usize, time_augment: bool) -> Result<SummaryVector> {
    SummarizerSpec::Signature { depth, time_augment }.summarize(traj)
}

pub fn summarize_crosscorr(traj: &Trajectory, n_lags: usize) -> Result<SummaryVector> {
    SummarizerSpec::CrossCorr { n_lags }.summarize(traj)
}

pub fn summarize_crosscorr_diff(traj: &Trajectory, n_lags: usize) -> Result<SummaryVector> {
    SummarizerSpec::CrossCorrDiff { n_lags }.summarize(traj)
}

fn push_step(out: &mut Vec<f64>, traj: &Trajectory, t: usize) {
    out.extend(traj.state(t).iter());
    out.extend(traj.action(t).iter());
}

fn start_features(traj: &Trajectory, n_steps: usize) -> Result<Vec<f64>> {
    if n_steps > traj.len() {
        return Err(invalid(format!("start n_steps={n_steps} exceeds T={}", traj.len())));
    }
    let mut out = Vec::with_capacity(n_steps * (traj.state_dim() + traj.action_dim()));
    for t in 0..n_steps {
        push_step(&mut out, traj, t);
    }
    Ok(out)
}

fn waypoint_features(traj: &Trajectory, stride: usize) -> Result<Vec<f64>> {
    if stride > traj.len() {
        return Err(invalid(format!("waypoints stride={stride} exceeds T={}", traj.len())));
    }
    let mut out = Vec::new();
    for t in (0..traj.len()).step_by(stride) {
        push_step(&mut out, traj, t);
    }
    Ok(out)
}

fn signature_features(traj: &Trajectory, depth: usize, time_augment: bool) -> Result<Vec<f64>> {
    let points: Vec<Vec<f64>> = (0..traj.len())
        .map(|t| {
            let mut p = Vec::with_capacity(traj.state_dim() + 1);
            if time_augment {
                p.push(t as f64 * traj.dt());
            }
            p.extend(traj.state(t).iter());
            p
        })
        .collect();
    Ok(PathSignature::of_path(&points, depth)?.flatten())
}

fn crosscorr_features(traj: &Trajectory, n_lags: usize, differences: bool) -> Result<Vec<f64>> {
    let t_len = traj.len();
    if n_lags + 1 > t_len {
        return Err(invalid(format!("n_lags={n_lags} needs T >= {}", n_lags + 1)));
    }
    let (ds, da) = (traj.state_dim(), traj.action_dim());
    let states = traj.states();
    let actions = traj.actions();
    // x[i][t]: the per-dimension signal being correlated
    let signal: Vec<Vec<f64>> = (0..ds)
        .map(|i| {
            let col = states.column(i);
            if differences {
                col.windows(2).into_iter().map(|w| w[1] - w[0]).collect()
            } else {
                col.to_vec()
            }
        })
        .collect();
    let n = signal[0].len();
    let mut out = Vec::with_capacity(ds * da * n_lags + 2 * ds);
    for x in &signal {
        for j in 0..da {
            let a = actions.column(j);
            for tau in 0..n_lags {
                let valid = n - tau;
                let sum: f64 = (0..valid).map(|t| a[t] * x[t + tau]).sum();
                out.push(sum / valid as f64);
            }
        }
    }
    let means: Vec<f64> = signal.iter().map(|x| x.iter().sum::<f64>() / n as f64).collect();
    out.extend(&means);
    for (x, m) in signal.iter().zip(&means) {
        out.push(x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn traj(states: Array2<f64>, actions: Array2<f64>) -> Trajectory {
        Trajectory::new(states, actions, 0.1, None).unwrap()
    }

    fn ramp(t: usize, ds: usize, da: usize) -> Trajectory {
        traj(
            Array2::from_shape_fn((t, ds), |(t, i)| (t * 10 + i) as f64),
            Array2::from_shape_fn((t, da), |(t, j)| -((t * 10 + j) as f64)),
        )
    }

    #[test]
    fn summary_dim_examples() {
        assert_eq!(SummarizerSpec::Waypoints { stride: 5 }.summary_dim(2, 1, 10).unwrap(), 6);
        assert_eq!(
            SummarizerSpec::Signature {
                depth: 2,
                time_augment: true
            }
            .summary_dim(1, 0, 10)
            .unwrap(),
            6
        );
        assert_eq!(SummarizerSpec::CrossCorr { n_lags: 3 }.summary_dim(2, 1, 10).unwrap(), 10);
        assert!(SummarizerSpec::Start { n_steps: 11 }.summary_dim(2, 1, 10).is_err());
        assert!(SummarizerSpec::Waypoints { stride: 11 }.summary_dim(2, 1, 10).is_err());
    }

    #[test]
    fn start_snippets() {
        let tr = ramp(4, 2, 1);
        assert_eq!(summarize_start(&tr, 1).unwrap().values, vec![0.0, 1.0, -0.0]);
        let full = summarize_start(&tr, 4).unwrap().values;
        assert_eq!(full.len(), 12);
        assert_eq!(&full[3..6], &[10.0, 11.0, -10.0]);
        let zeros = traj(Array2::zeros((5, 2)), Array2::zeros((5, 1)));
        assert_eq!(summarize_start(&zeros, 3).unwrap().values, vec![0.0; 9]);
        assert!(summarize_start(&tr, 5).is_err());
    }

    #[test]
    fn waypoint_indices() {
        let tr = ramp(10, 1, 1);
        assert_eq!(summarize_waypoints(&tr, 5).unwrap().values, vec![0.0, -0.0, 50.0, -50.0]);
        let tr7 = ramp(7, 2, 1);
        let v = summarize_waypoints(&tr7, 3).unwrap().values;
        assert_eq!(v.len(), 9);
        assert_eq!(v[6], 60.0);
        assert_eq!(
            summarize_waypoints(&tr7, 1).unwrap().values,
            summarize_start(&tr7, 7).unwrap().values
        );
    }

    #[test]
    fn crosscorr_constant_trajectory() {
        let tr = traj(Array2::ones((6, 1)), Array2::ones((6, 1)));
        assert_eq!(summarize_crosscorr(&tr, 1).unwrap().values, vec![1.0, 1.0, 0.0]);
        assert_eq!(summarize_crosscorr_diff(&tr, 1).unwrap().values, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn crosscorr_ramp_by_hand() {
        let tr = traj(array![[0.0], [1.0], [2.0], [3.0]], Array2::ones((4, 1)));
        assert_eq!(summarize_crosscorr(&tr, 2).unwrap().values, vec![1.5, 2.0, 1.5, 1.25]);
        assert!(summarize_crosscorr(&tr, 4).is_err());
        assert!(summarize_crosscorr_diff(&tr, 3).is_ok());
    }

    #[test]
    fn crosscorr_ordering_is_i_j_tau() {
        let tr = traj(
            array![[1.0, 10.0], [2.0, 20.0], [3.0, 30.0]],
            array![[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]],
        );
        let v = summarize_crosscorr(&tr, 2).unwrap().values;
        // (i=0,j=0), (i=0,j=1), (i=1,j=0), (i=1,j=1), each with two lags
        assert_eq!(&v[..8], &[2.0, 2.5, 0.0, 0.0, 20.0, 25.0, 0.0, 0.0]);
        assert_eq!(&v[8..10], &[2.0, 20.0]);
    }

    #[test]
    fn signature_summary_uses_states_and_time() {
        let tr = traj(array![[0.0], [2.0]], array![[5.0], [7.0]]);
        let v = summarize_signature(&tr, 2, false).unwrap().values;
        assert_eq!(v, vec![2.0, 2.0]);
        let v = summarize_signature(&tr, 2, true).unwrap().values;
        // increments (dt, 2)
        let (a, b) = (0.1, 2.0);
        let expected = [a, b, a * a / 2.0, a * b / 2.0, a * b / 2.0, b * b / 2.0];
        for (x, y) in v.iter().zip(expected) {
            assert_close!(*x, y, 1e-15);
        }
    }

    #[test]
    fn ids_and_parsing() {
        let spec: SummarizerSpec = "cross_corr_difference".parse().unwrap();
        assert_eq!(spec, SummarizerSpec::CrossCorrDiff { n_lags: 5 });
        assert_eq!(spec.id(), "cross_corr_diff:n_lags=5");
        let sig: SummarizerSpec = "signature:depth=2,time_augment=false".parse().unwrap();
        assert_eq!(
            sig,
            SummarizerSpec::Signature {
                depth: 2,
                time_augment: false
            }
        );
        assert_eq!(sig.id().parse::<SummarizerSpec>().unwrap(), sig);
        assert!("signature:depth=9".parse::<SummarizerSpec>().is_err());
        assert!("waypoints:n_lags=2".parse::<SummarizerSpec>().is_err());
        assert!("fourier".parse::<SummarizerSpec>().is_err());
    }

    #[test]
    fn every_summarizer_matches_its_dim() {
        let tr = ramp(23, 3, 2);
        for spec in [
            SummarizerSpec::Start { n_steps: 4 },
            SummarizerSpec::Waypoints { stride: 5 },
            SummarizerSpec::Signature {
                depth: 3,
                time_augment: true,
            },
            SummarizerSpec::CrossCorr { n_lags: 4 },
            SummarizerSpec::CrossCorrDiff { n_lags: 4 },
        ] {
            let s = spec.summarize(&tr).unwrap();
            assert_eq!(s.len(), spec.summary_dim(3, 2, 23).unwrap(), "{spec}");
            assert_eq!(s.summarizer_id, spec.id());
            assert_eq!(spec.summarize(&tr).unwrap(), s);
        }
    }
}
