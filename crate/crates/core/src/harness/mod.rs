//! Experiment configs, deterministic parallel execution, CSV output and the CLI.
//!
//! Every trial draws its randomness from substreams keyed by
//! `(master seed, trial index, purpose)`, and results are collected in trial
//! order, so output files are byte-identical for any thread count.

mod cli;
mod config;
mod csv;
mod run;

use std::process::ExitCode;

pub use cli::{parse_cli, run_cli, CliError, Invocation, THREADS_ENV};
pub use config::{ExperimentConfig, ExperimentKind, LearnerKind, PolicyKind, TracerChoice, Variant};
pub use csv::{format_float, write_atomic, TrialRecord, TRIAL_COLUMNS, VERIFY_COLUMNS};
pub use run::{execute, learner_config, problem_spec, resolve_prior, run, run_with_threads, ResolvedPrior, RunOutcome};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] crate::Error),
}

impl HarnessError {
    pub fn exit_status(&self) -> ExitStatus {
        match self {
            HarnessError::Usage(_) => ExitStatus::Usage,
            HarnessError::Io(_) => ExitStatus::Io,
            HarnessError::Core(crate::Error::InvalidArgument(_)) => ExitStatus::Usage,
            HarnessError::Core(_) => ExitStatus::AcceptanceFailure,
        }
    }
}

/// Process exit codes of the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    /// An identity, bound or privacy ceiling check failed.
    AcceptanceFailure = 1,
    Usage = 2,
    Io = 3,
}

impl ExitStatus {
    pub fn code(self) -> u8 {
        self as u8
    }
}

impl From<ExitStatus> for ExitCode {
    fn from(s: ExitStatus) -> Self {
        ExitCode::from(s.code())
    }
}
