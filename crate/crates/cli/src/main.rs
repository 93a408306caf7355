use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use simcal_core::inference::sample_mean_std;
use simcal_core::pipeline::{self, artifacts, Overrides, RawConfig, RunConfig};

#[derive(Parser)]
#[command(name = "simcal", version, about = "Likelihood-free simulator calibration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the iterated sample / simulate / train / condition loop.
    Run(CommonArgs),
    /// Brute-force rejection-ABC posterior for the first real episode.
    Oracle {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 20_000)]
        n_sims: usize,
        #[arg(long, default_value_t = 0.02)]
        quantile: f64,
        /// CSV for the accepted parameters (default: <logdir>/<run>/oracle_samples.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// Pendulum, Cartpole or MassSpringDamper.
    #[arg(long)]
    task: Option<String>,
    /// YAML config; command-line flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    logdir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iters: Option<usize>,
    /// MDNN or MDRFF.
    #[arg(long)]
    model: Option<String>,
    /// Summarizer kind or full id, e.g. `signature:depth=2,time_augment=true`.
    #[arg(long)]
    summarizer: Option<String>,
    /// random or fixed.
    #[arg(long)]
    policy: Option<String>,
}

impl CommonArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut raw = match &self.config {
            Some(path) => RawConfig::load(path)?,
            None => RawConfig::default(),
        };
        raw.apply(&Overrides {
            task: self.task.clone(),
            seed: self.seed,
            n_iters: self.iters,
            model: self.model.clone(),
            summarizer: self.summarizer.clone(),
            policy: self.policy.clone(),
            logdir: self.logdir.clone(),
        });
        Ok(RunConfig::resolve(&raw)?)
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

fn run(args: &CommonArgs) -> Result<()> {
    let cfg = args.resolve()?;
    println!("run {} -> {}", cfg.run_name(), cfg.run_dir().display());
    let out = pipeline::run(&cfg)?;
    for r in &out.records {
        println!(
            "iter {}: val_nll {:.4} mean {} std {} logpdf_at_truth {:.4}",
            r.iteration,
            r.val_nll,
            fmt_vec(&r.posterior_mean),
            fmt_vec(&r.posterior_std),
            r.logpdf_at_truth
        );
    }
    Ok(())
}

fn oracle(args: &CommonArgs, n_sims: usize, quantile: f64, out: Option<PathBuf>) -> Result<()> {
    let cfg = args.resolve()?;
    let result = pipeline::oracle(&cfg, n_sims, quantile)?;
    let path = match out {
        Some(p) => p,
        None => {
            std::fs::create_dir_all(cfg.run_dir())?;
            cfg.run_dir().join("oracle_samples.csv")
        }
    };
    let names: Vec<String> = cfg.task.param_space().names().map(str::to_owned).collect();
    artifacts::write_samples(&path, &names, &result.accepted).with_context(|| format!("writing {}", path.display()))?;
    let (mean, std) = sample_mean_std(&result.accepted);
    println!(
        "accepted {} of {} (threshold {:.4}) mean {} std {} -> {}",
        result.accepted.nrows(),
        result.simulated,
        result.threshold,
        fmt_vec(&mean),
        fmt_vec(&std),
        path.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Oracle {
            common,
            n_sims,
            quantile,
            out,
        } => oracle(common, *n_sims, *quantile, out.clone()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("simcal: {msg}");
            ExitCode::FAILURE
        }
    }
}
