//! Command-line front end: `sco-trace <subcommand> [--config FILE] [flags]`.
//! Flags override values from the config file, which override the defaults.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::config::{ExperimentConfig, ExperimentKind, LearnerKind, PolicyKind, TracerChoice, Variant};
use super::{run_with_threads, ExitStatus, HarnessError};

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "SCO_TRACE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "sco-trace", version, about = "Fingerprinting tracing attacks on linear SCO learners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the fingerprinting identities exactly on the small-instance grid
    Verify(Flags),
    /// Run tracing trials against one learner
    Trace(Flags),
    /// Trace the Gaussian-mechanism learner and compare recall with the privacy ceiling
    DpAudit(Flags),
    /// Trace the Gaussian-mechanism learner at each of `sweep_epsilons`
    Sweep(Flags),
    /// Estimate the trace value of a learner
    TraceValue(Flags),
}

#[derive(Debug, Args)]
struct Flags {
    /// Config file of `key = value` lines; flags override it
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads, >= 1 (output does not depend on it)
    #[arg(long, env = THREADS_ENV)]
    threads: Option<usize>,
    /// Problem variant: box_lp, l1_capped or l1_counterexample
    #[arg(long)]
    variant: Option<Variant>,
    /// Dimension, >= 1
    #[arg(long)]
    d: Option<usize>,
    /// Box exponent, p in [1, inf)
    #[arg(long)]
    p: Option<f64>,
    /// Data sparsity for box_lp, k in [1, d] (default d)
    #[arg(long)]
    k: Option<usize>,
    /// Sparsity cap for l1_capped, s in [1, d]
    #[arg(long)]
    s: Option<usize>,
    /// Learner: erm, gaussian_dp, subsample, normalized_mean or constant
    #[arg(long)]
    learner: Option<LearnerKind>,
    /// Privacy parameter, epsilon in (0, 10]
    #[arg(long)]
    epsilon: Option<f64>,
    /// Privacy parameter, delta in (0, 1)
    #[arg(long)]
    delta: Option<f64>,
    /// Prefix size for the subsample learner, in [1, n]
    #[arg(long)]
    subsample_m: Option<usize>,
    /// Score function: sparse (box_lp) or scaling (dense data)
    #[arg(long)]
    tracer: Option<TracerChoice>,
    /// Target false-positive rate, xi in (0, 1)
    #[arg(long)]
    xi: Option<f64>,
    /// Threshold rule: null_quantile or half_trace_value
    #[arg(long)]
    policy: Option<PolicyKind>,
    /// Prior concentration, beta > 0
    #[arg(long, conflicts_with = "alpha_target")]
    beta: Option<f64>,
    /// Accuracy target the prior is tuned to, alpha > 0 (default: pilot ERM risk)
    #[arg(long)]
    alpha_target: Option<f64>,
    /// Prior half-width for the scaling tracer, gamma in (0, 1]
    #[arg(long)]
    gamma: Option<f64>,
    /// Training sample size, >= 1
    #[arg(long)]
    n: Option<usize>,
    /// Fresh evaluation points per trial, >= 1
    #[arg(long)]
    m: Option<usize>,
    /// Number of trials, >= 1 (>= 30 for trace-value)
    #[arg(long)]
    trials: Option<usize>,
    /// Trials for pilot estimates, >= 30
    #[arg(long)]
    pilot_trials: Option<usize>,
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Epsilons visited by sweep, comma separated, each in (0, 10]
    #[arg(long, value_delimiter = ',')]
    sweep_epsilons: Option<Vec<f64>>,
}

/// A parsed command line.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub config: ExperimentConfig,
    pub threads: Option<usize>,
}

/// Parses `argv` (including the program name) into a config. `--help` and
/// `--version` surface as a [`clap::Error`] to print.
pub fn parse_cli<I, T>(argv: I) -> Result<Invocation, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(CliError::Clap)?;
    let (kind, f) = match cli.command {
        Command::Verify(f) => (ExperimentKind::Verify, f),
        Command::Trace(f) => (ExperimentKind::Trace, f),
        Command::DpAudit(f) => (ExperimentKind::DpAudit, f),
        Command::Sweep(f) => (ExperimentKind::Sweep, f),
        Command::TraceValue(f) => (ExperimentKind::TraceValue, f),
    };
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &f.config {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        cfg.apply(&text)?;
    }
    cfg.experiment = kind;
    macro_rules! set {
        ($($field:ident),+) => { $(if let Some(v) = f.$field { cfg.$field = v; })+ };
    }
    set!(variant, d, p, s, learner, epsilon, delta, subsample_m, tracer, xi, policy, n, m, trials, pilot_trials, seed, output, sweep_epsilons);
    if f.k.is_some() {
        cfg.k = f.k;
    }
    if f.gamma.is_some() {
        cfg.gamma = f.gamma;
    }
    if f.beta.is_some() {
        cfg.beta = f.beta;
        cfg.alpha_target = None;
    }
    if f.alpha_target.is_some() {
        cfg.alpha_target = f.alpha_target;
        cfg.beta = None;
    }
    cfg.validate()?;
    Ok(Invocation { config: cfg, threads: f.threads })
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Clap(clap::Error),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

/// Parses, runs and reports; returns the process exit status.
pub fn run_cli<I, T>(argv: I) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let inv = match parse_cli(argv) {
        Ok(inv) => inv,
        Err(CliError::Clap(e)) => {
            let _ = e.print();
            return if e.use_stderr() { ExitStatus::Usage } else { ExitStatus::Success };
        }
        Err(CliError::Harness(e)) => {
            eprintln!("error: {e}");
            return e.exit_status();
        }
    };
    match run_with_threads(&inv.config, inv.threads) {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            println!("wrote {}", inv.config.output.display());
            outcome.status
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_status()
        }
    }
}
