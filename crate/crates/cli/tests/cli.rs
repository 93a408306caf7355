use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "n_iters: 1
n_sims_per_iter: 200
episode_len: 40
n_posterior_samples: 100
slice_grid: 10
model:
  hidden_sizes: [16]
  components: 2
train:
  max_epochs: 5
";

fn simcal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simcal")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.yaml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let logdir = dir.path().join("logs");
    let out = simcal(&[
        "run",
        "--config",
        &cfg,
        "--logdir",
        logdir.to_str().unwrap(),
        "--seed",
        "3",
        "--task",
        "MassSpringDamper",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = logdir.join("MassSpringDamper_MDNN_crosscorrdiff_random_seed3");
    for f in [
        "scalars.csv",
        "config_resolved",
        "posterior_samples_iter0.csv",
        "posterior_slice_iter0_mass_stiffness.csv",
        "model_iter0.ckpt",
    ] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    assert!(String::from_utf8_lossy(&out.stdout).contains("iter 0:"));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}task: Cartpole\nseed: 1\n"));
    let logdir = dir.path().join("logs");
    let out = simcal(&[
        "run",
        "--config",
        &cfg,
        "--logdir",
        logdir.to_str().unwrap(),
        "--task",
        "Pendulum",
        "--policy",
        "fixed",
        "--summarizer",
        "waypoints",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(logdir.join("Pendulum_MDNN_waypoints_fixed_seed1").is_dir());
}

#[test]
fn config_errors_exit_nonzero_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n_sims_per_itr: 100\n");
    let out = simcal(&["run", "--config", &cfg]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("n_sims_per_itr"), "{err}");

    let out = simcal(&["run", "--task", "Acrobot"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Acrobot"));

    let out = simcal(&["run", "--config", "/nonexistent/config.yaml"]);
    assert!(!out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stderr).trim_end().lines().count(), 1);
}

#[test]
fn oracle_writes_accepted_samples() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let csv = dir.path().join("abc.csv");
    let out = simcal(&[
        "oracle",
        "--config",
        &cfg,
        "--n-sims",
        "1000",
        "--quantile",
        "0.05",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("mass,length"));
    assert_eq!(lines.count(), 50);

    let out = simcal(&["oracle", "--config", &cfg, "--n-sims", "10"]);
    assert!(!out.status.success());
}
