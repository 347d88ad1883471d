//! Turning a config into trials, records and a CSV file.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind, LearnerKind, PolicyKind, TracerChoice, Variant};
use super::csv::{field, format_float, write_atomic, TrialRecord, TRIAL_COLUMNS, VERIFY_COLUMNS};
use super::{ExitStatus, HarnessError};
use crate::distributions::BetaPrior;
use crate::learners::{measure_excess_risk, GaussianMechanism, LearnerConfig};
use crate::oracles::{dense_agreement_grid, scaling_identity_grid, sparse_identity_grid, IdentityCheckResult, IDENTITY_TOL};
use crate::problems::{ParameterPoint, ProblemSpec};
use crate::rng::SeedTree;
use crate::stats::Estimate;
use crate::tracers::{
    box_prior_beta, estimate_trace_value, run_trace_trial, scaling_prior_params, trace_value_trial, ThresholdPolicy, TraceExperiment,
    TraceSetup,
};

/// Seed-tree labels for pilot runs, kept apart from the main trials.
const PILOT_RISK: u64 = 1;
const PILOT_TRACE_VALUE: u64 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub status: ExitStatus,
    /// Full CSV text, as written to the output path.
    pub csv: String,
    /// Human-readable result lines.
    pub summary: Vec<String>,
}

pub fn problem_spec(cfg: &ExperimentConfig) -> Result<ProblemSpec, HarnessError> {
    Ok(match cfg.variant {
        Variant::BoxLp => ProblemSpec::box_lp(cfg.d, cfg.p, cfg.k.unwrap_or(cfg.d))?,
        Variant::L1Capped => ProblemSpec::l1_capped(cfg.d, cfg.s)?,
        Variant::L1Counterexample => ProblemSpec::l1_counterexample(cfg.d)?,
    })
}

pub fn learner_config(cfg: &ExperimentConfig, kind: LearnerKind, epsilon: f64) -> LearnerConfig {
    match kind {
        LearnerKind::Erm => LearnerConfig::ErmLinear,
        LearnerKind::GaussianDp => LearnerConfig::GaussianDp { epsilon, delta: cfg.delta },
        LearnerKind::Subsample => LearnerConfig::Subsample { m: cfg.subsample_m },
        LearnerKind::NormalizedMean => LearnerConfig::NormalizedMeanL2,
        LearnerKind::Constant => LearnerConfig::Constant(ParameterPoint::zeros(cfg.d)),
    }
}

/// The prior used for the trials, and the accuracy target it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedPrior {
    pub prior: BetaPrior,
    /// `None` when `beta` was given directly.
    pub alpha_target: Option<f64>,
    /// True when `alpha_target` came from a pilot ERM run.
    pub alpha_from_pilot: bool,
}

/// Picks `(beta, gamma)`: explicit `beta` wins; otherwise `beta` follows from
/// `alpha_target`, which defaults to the ERM excess risk measured under a
/// uniform (`beta = 1`) prior in a pilot run.
pub fn resolve_prior(cfg: &ExperimentConfig, spec: &ProblemSpec, seeds: &SeedTree) -> Result<ResolvedPrior, HarnessError> {
    let bound = spec.mean_bound();
    let (alpha, from_pilot) = match (cfg.beta, cfg.alpha_target) {
        (Some(_), _) => (None, false),
        (None, Some(a)) => (Some(a), false),
        (None, None) => {
            let uniform = BetaPrior::new(1.0, bound, cfg.d)?;
            let risk = measure_excess_risk(&LearnerConfig::ErmLinear, spec, &uniform, cfg.n, cfg.pilot_trials, &seeds.child(PILOT_RISK))?;
            if risk.mean <= 0.0 {
                return Err(HarnessError::Usage("alpha_target: pilot ERM risk is zero, set beta or alpha_target".into()));
            }
            (Some(risk.mean), true)
        }
    };
    let prior = match cfg.tracer {
        TracerChoice::Sparse => {
            let beta = match (cfg.beta, alpha) {
                (Some(b), _) => b,
                (None, Some(a)) => box_prior_beta(cfg.d, cfg.p, cfg.data_sparsity(), a),
                (None, None) => unreachable!("alpha is set whenever beta is not"),
            };
            BetaPrior::new(beta, bound, cfg.d)?
        }
        TracerChoice::Scaling => {
            let s = if cfg.variant == Variant::L1Capped { cfg.s } else { 1 };
            let (beta, gamma) = match (cfg.beta, alpha) {
                (Some(b), _) => (b, bound),
                (None, Some(a)) => scaling_prior_params(cfg.d, s, a),
                (None, None) => unreachable!("alpha is set whenever beta is not"),
            };
            BetaPrior::new(beta, cfg.gamma.unwrap_or(gamma), cfg.d)?
        }
    };
    Ok(ResolvedPrior { prior, alpha_target: alpha, alpha_from_pilot: from_pilot })
}

struct Summary {
    rows: Vec<String>,
    lines: Vec<String>,
}

impl Summary {
    fn new() -> Self {
        Self { rows: Vec::new(), lines: Vec::new() }
    }

    fn metric(&mut self, point: usize, name: &str, est: &Estimate) {
        self.rows.push(format!(
            "#summary,{point},{name},{},{},{}",
            format_float(est.mean),
            format_float(est.ci_half_width),
            est.count
        ));
    }

    fn resolved(&mut self, point: usize, name: &str, value: f64) {
        self.rows.push(format!("#resolved,{point},{name},{}", format_float(value)));
    }
}

fn render(header: &[&str], body: &[String], summary: &Summary, cfg: &ExperimentConfig) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for line in body.iter().chain(&summary.rows) {
        out.push_str(line);
        out.push('\n');
    }
    for (k, v) in cfg.entries() {
        writeln!(out, "#config,{k},{}", field(&v)).expect("writing to a String");
    }
    out
}

fn estimate_of(records: &[TrialRecord], f: impl Fn(&TrialRecord) -> f64) -> Estimate {
    Estimate::from_samples(&records.iter().map(f).collect::<Vec<_>>())
}

/// Runs the trials of one trace configuration (one sweep point).
fn trace_point(
    cfg: &ExperimentConfig,
    point: usize,
    learner: LearnerConfig,
    resolved: &ResolvedPrior,
    spec: &ProblemSpec,
    seeds: &SeedTree,
    summary: &mut Summary,
) -> Result<Vec<TrialRecord>, HarnessError> {
    let setup = TraceSetup { learner: learner.clone(), spec: *spec, tracer: cfg.tracer.into(), prior: resolved.prior, n: cfg.n };
    let noise_sigma = match learner {
        LearnerConfig::GaussianDp { epsilon, delta } => GaussianMechanism::for_mean(epsilon, delta, spec.data_sparsity(), cfg.n).sigma(),
        _ => 0.0,
    };
    let policy = match cfg.policy {
        PolicyKind::NullQuantile => ThresholdPolicy::NullQuantile { xi: cfg.xi },
        PolicyKind::HalfTraceValue => {
            let t = estimate_trace_value(&setup, cfg.pilot_trials, &seeds.child(PILOT_TRACE_VALUE))?;
            summary.resolved(point, "pilot_t_hat", t.mean);
            ThresholdPolicy::HalfTraceValue { t_hat: t.mean }
        }
    };
    let exp = TraceExperiment { setup, fresh: cfg.m, policy };
    let records = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let rep = run_trace_trial(&exp, seeds, t)?;
            Ok(TrialRecord {
                point,
                noise_sigma,
                trial_index: t,
                mu_norm_l1: rep.mu_norm_l1,
                excess_risk: rep.excess_risk,
                t_hat_contribution: rep.t_hat_contribution(),
                recall: Some(rep.recall_estimate),
                recall_pz: Some(rep.recall_pz),
                soundness: Some(rep.soundness_estimate),
                lambda: Some(rep.lambda),
                flags_count: Some(rep.fresh_flags()),
                clip_events: rep.clip_events,
            })
        })
        .collect::<Result<Vec<_>, crate::Error>>()?;
    summary.resolved(point, "noise_sigma", noise_sigma);
    for (name, f) in [
        ("recall", (|r: &TrialRecord| r.recall.unwrap_or(0.0)) as fn(&TrialRecord) -> f64),
        ("recall_pz", |r| r.recall_pz.unwrap_or(0.0)),
        ("soundness", |r| r.soundness.unwrap_or(0.0)),
        ("lambda", |r| r.lambda.unwrap_or(0.0)),
        ("t_hat", |r| r.t_hat_contribution),
        ("excess_risk", |r| r.excess_risk),
        ("clip_events", |r| r.clip_events as f64),
    ] {
        summary.metric(point, name, &estimate_of(&records, f));
    }
    let recall = estimate_of(&records, |r| r.recall.unwrap_or(0.0));
    let sound = estimate_of(&records, |r| r.soundness.unwrap_or(0.0));
    summary.lines.push(format!(
        "point {point}: learner {} sigma {noise_sigma:.4}: recall {:.3} ± {:.3} of n = {}, soundness {:.4} ± {:.4}",
        learner.name(),
        recall.mean,
        recall.ci_half_width,
        cfg.n,
        sound.mean,
        sound.ci_half_width
    ));
    Ok(records)
}

fn record_prior(summary: &mut Summary, resolved: &ResolvedPrior) {
    summary.resolved(0, "beta", resolved.prior.beta());
    summary.resolved(0, "gamma", resolved.prior.gamma());
    if let Some(a) = resolved.alpha_target {
        summary.resolved(0, "alpha_target", a);
    }
    summary.lines.push(format!(
        "prior beta {:.4} gamma {:.4}{}",
        resolved.prior.beta(),
        resolved.prior.gamma(),
        match (resolved.alpha_target, resolved.alpha_from_pilot) {
            (Some(a), true) => format!(" (alpha_target {a:.6} from pilot ERM risk)"),
            (Some(a), false) => format!(" (alpha_target {a})"),
            _ => String::new(),
        }
    ));
}

fn run_verify(cfg: &ExperimentConfig) -> Result<RunOutcome, HarnessError> {
    let mut rows = Vec::new();
    let mut failures = 0;
    let grids: [(&str, Vec<IdentityCheckResult>); 3] =
        [("sparse", sparse_identity_grid()?), ("scaling", scaling_identity_grid()?), ("dense_agreement", dense_agreement_grid()?)];
    let mut summary = Summary::new();
    for (check, results) in &grids {
        let worst = results.iter().map(|r| r.rel_error).fold(0.0, f64::max);
        let failed = results.iter().filter(|r| !r.passes(IDENTITY_TOL)).count();
        failures += failed;
        summary.lines.push(format!("{check}: {} instances, {failed} failed, worst rel_error {worst:.3e}", results.len()));
        summary.resolved(0, &format!("{check}_worst_rel_error"), worst);
        for r in results {
            rows.push(format!(
                "{check},{},{},{},{},{}",
                field(&r.instance),
                format_float(r.lhs),
                format_float(r.rhs),
                format_float(r.rel_error),
                r.passes(IDENTITY_TOL)
            ));
        }
    }
    let status = if failures == 0 { ExitStatus::Success } else { ExitStatus::AcceptanceFailure };
    Ok(RunOutcome { status, csv: render(&VERIFY_COLUMNS, &rows, &summary, cfg), summary: summary.lines })
}

fn run_trace_value(cfg: &ExperimentConfig, spec: &ProblemSpec, seeds: &SeedTree) -> Result<RunOutcome, HarnessError> {
    let mut summary = Summary::new();
    let resolved = resolve_prior(cfg, spec, seeds)?;
    record_prior(&mut summary, &resolved);
    let learner = learner_config(cfg, cfg.learner, cfg.epsilon);
    learner.validate()?;
    let setup = TraceSetup { learner, spec: *spec, tracer: cfg.tracer.into(), prior: resolved.prior, n: cfg.n };
    let records = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let r = trace_value_trial(&setup, seeds, t)?;
            Ok(TrialRecord {
                point: 0,
                noise_sigma: 0.0,
                trial_index: t,
                mu_norm_l1: r.mu_norm_l1,
                excess_risk: r.excess_risk,
                t_hat_contribution: r.t_hat_contribution,
                recall: None,
                recall_pz: None,
                soundness: None,
                lambda: None,
                flags_count: None,
                clip_events: r.clip_events,
            })
        })
        .collect::<Result<Vec<_>, crate::Error>>()?;
    let t_hat = estimate_of(&records, |r| r.t_hat_contribution);
    let scaled = Estimate {
        mean: t_hat.mean * (cfg.n as f64 / cfg.d as f64).sqrt(),
        ci_half_width: t_hat.ci_half_width * (cfg.n as f64 / cfg.d as f64).sqrt(),
        count: t_hat.count,
    };
    summary.metric(0, "t_hat", &t_hat);
    summary.metric(0, "t_hat_sqrt_n_over_sqrt_d", &scaled);
    summary.metric(0, "excess_risk", &estimate_of(&records, |r| r.excess_risk));
    summary.lines.push(format!(
        "trace value {:.5} ± {:.5}; scaled by sqrt(n/d): {:.5} ± {:.5}",
        t_hat.mean, t_hat.ci_half_width, scaled.mean, scaled.ci_half_width
    ));
    let body: Vec<String> = records.iter().map(TrialRecord::to_csv).collect();
    Ok(RunOutcome { status: ExitStatus::Success, csv: render(&TRIAL_COLUMNS, &body, &summary, cfg), summary: summary.lines })
}

/// Runs the experiment and returns its CSV text without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutcome, HarnessError> {
    cfg.validate()?;
    if cfg.experiment == ExperimentKind::Verify {
        return run_verify(cfg);
    }
    let spec = problem_spec(cfg)?;
    let seeds = SeedTree::new(cfg.seed);
    if cfg.experiment == ExperimentKind::TraceValue {
        return run_trace_value(cfg, &spec, &seeds);
    }
    let mut summary = Summary::new();
    let resolved = resolve_prior(cfg, &spec, &seeds)?;
    record_prior(&mut summary, &resolved);
    let mut records = Vec::new();
    let mut status = ExitStatus::Success;
    match cfg.experiment {
        ExperimentKind::Trace => {
            let learner = learner_config(cfg, cfg.learner, cfg.epsilon);
            records = trace_point(cfg, 0, learner, &resolved, &spec, &seeds, &mut summary)?;
        }
        ExperimentKind::DpAudit => {
            let learner = learner_config(cfg, LearnerKind::GaussianDp, cfg.epsilon);
            records = trace_point(cfg, 0, learner, &resolved, &spec, &seeds, &mut summary)?;
            let recall = estimate_of(&records, |r| r.recall.unwrap_or(0.0));
            let n = cfg.n as f64;
            let ceiling = n * cfg.epsilon.exp() * cfg.xi + n * cfg.delta;
            summary.resolved(0, "recall_ceiling", ceiling);
            let ok = recall.mean <= ceiling + 4.0 * recall.ci_half_width;
            summary.lines.push(format!(
                "privacy ceiling n e^eps xi + n delta = {ceiling:.4}: mean recall {:.4} {}",
                recall.mean,
                if ok { "within ceiling" } else { "EXCEEDS ceiling" }
            ));
            if !ok {
                status = ExitStatus::AcceptanceFailure;
            }
        }
        ExperimentKind::Sweep => {
            for (point, &eps) in cfg.sweep_epsilons.iter().enumerate() {
                let learner = learner_config(cfg, LearnerKind::GaussianDp, eps);
                summary.resolved(point, "epsilon", eps);
                records.extend(trace_point(cfg, point, learner, &resolved, &spec, &seeds, &mut summary)?);
            }
        }
        ExperimentKind::Verify | ExperimentKind::TraceValue => unreachable!("handled above"),
    }
    let body: Vec<String> = records.iter().map(TrialRecord::to_csv).collect();
    Ok(RunOutcome { status, csv: render(&TRIAL_COLUMNS, &body, &summary, cfg), summary: summary.lines })
}

/// Runs the experiment and writes its CSV atomically to `cfg.output`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome, HarnessError> {
    let outcome = execute(cfg)?;
    write_atomic(&cfg.output, &outcome.csv)?;
    Ok(outcome)
}

/// [`run`] on a dedicated pool of `threads` workers (the global pool when `None`).
pub fn run_with_threads(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<RunOutcome, HarnessError> {
    match threads {
        None => run(cfg),
        Some(0) => Err(HarnessError::Usage("threads: must be >= 1".into())),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| HarnessError::Io(format!("cannot start thread pool: {e}")))?;
            pool.install(|| run(cfg))
        }
    }
}
