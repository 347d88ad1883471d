//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::time::{Duration, Instant};

use rand::Rng;
use sco_trace::harness::{execute, run_with_threads, ExperimentConfig, ExperimentKind, LearnerKind, PolicyKind};
use sco_trace::learners::Dataset;
use sco_trace::oracles::{
    check_beta_abs_moment, check_card_moments, dense_agreement_grid, scaling_identity_grid, sparse_identity_grid, verify_sparse_identity,
    IdentityCheckResult, IDENTITY_TOL,
};
use sco_trace::rng::{Purpose, SeedTree};

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;
type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Outcome + 'a>);

/// Reads a `#summary,<point>,<metric>,<mean>,<ci>,<count>` row.
fn summary(csv: &str, point: usize, metric: &str) -> (f64, f64) {
    let prefix = format!("#summary,{point},{metric},");
    let line = csv.lines().find(|l| l.starts_with(&prefix)).unwrap_or_else(|| panic!("no summary row for {metric}"));
    let f: Vec<f64> = line[prefix.len()..].split(',').map(|x| x.parse().unwrap()).collect();
    (f[0], f[1])
}

fn resolved(csv: &str, name: &str) -> f64 {
    let prefix = format!("#resolved,0,{name},");
    csv.lines().find_map(|l| l.strip_prefix(&prefix)).unwrap().parse().unwrap()
}

fn grid_report(results: &[IdentityCheckResult]) -> (bool, String) {
    let worst = results.iter().map(|r| r.rel_error).fold(0.0, f64::max);
    let failed: Vec<&str> = results.iter().filter(|r| !r.passes(IDENTITY_TOL)).map(|r| r.instance.as_str()).collect();
    (failed.is_empty(), format!("{} instances, worst rel_error {worst:.2e}, failures {failed:?}", results.len()))
}

fn sparse_identity(elapsed: &mut Duration) -> Outcome {
    let start = Instant::now();
    let (ok, msg) = grid_report(&sparse_identity_grid()?);
    *elapsed = start.elapsed();
    Ok((ok && elapsed.as_secs_f64() < 60.0, format!("{msg}, limit 60 s")))
}

fn closed_form_anchor() -> Outcome {
    let identity = |data: &Dataset| data.samples()[0].to_f64();
    let mut ok = true;
    let mut parts = Vec::new();
    for beta in [1.0, 2.0, 5.0] {
        let want = 2.0 * beta / (2.0 * beta + 1.0);
        let r = verify_sparse_identity(1, 1, 1, beta, &identity)?;
        let err = (r.lhs - want).abs().max((r.rhs - want).abs());
        ok &= err <= 1e-8;
        parts.push(format!("beta={beta}: lhs {:.12} rhs {:.12} target {want:.12}", r.lhs, r.rhs));
    }
    Ok((ok, parts.join("; ")))
}

fn scaling_identity() -> Outcome {
    let (ok1, m1) = grid_report(&scaling_identity_grid()?);
    let (ok2, m2) = grid_report(&dense_agreement_grid()?);
    Ok((ok1 && ok2, format!("scaling grid: {m1}; gamma = 1 vs sparse k = d: {m2}")))
}

fn phase_transition() -> Outcome {
    let base = ExperimentConfig {
        experiment: ExperimentKind::Trace,
        d: 2048,
        p: 2.0,
        n: 200,
        xi: 0.05,
        m: 2000,
        trials: 200,
        pilot_trials: 200,
        seed: 4,
        ..Default::default()
    };
    let erm = execute(&base)?.csv;
    let dp_cfg = ExperimentConfig { experiment: ExperimentKind::DpAudit, learner: LearnerKind::GaussianDp, epsilon: 0.5, delta: 1e-5, ..base.clone() };
    let dp = execute(&dp_cfg)?.csv;
    let n = base.n as f64;
    let (erm_recall, _) = summary(&erm, 0, "recall");
    let (erm_sound, _) = summary(&erm, 0, "soundness");
    let (dp_recall, dp_ci) = summary(&dp, 0, "recall");
    let sound_cap = 0.05 + 3.0 * (0.05 / base.m as f64).sqrt();
    let ceiling = n * 0.5f64.exp() * 0.05 + n * 1e-5;
    let ok = erm_sound <= sound_cap && erm_recall >= 0.05 * n && dp_recall <= ceiling + 4.0 * dp_ci;
    Ok((
        ok,
        format!(
            "alpha_target {:.5} -> beta {:.1}; ERM soundness {erm_sound:.4} (cap {sound_cap:.4}), recall {erm_recall:.2} (need >= {:.0}); DP recall {dp_recall:.3} ± {dp_ci:.3} (ceiling {ceiling:.3})",
            resolved(&erm, "alpha_target"),
            resolved(&erm, "beta"),
            0.05 * n
        ),
    ))
}

fn recall_alpha_scaling() -> Outcome {
    let run = |alpha: f64| -> Result<(f64, f64, f64), Box<dyn std::error::Error>> {
        let cfg = ExperimentConfig {
            d: 4096,
            n: 400,
            m: 200,
            trials: 300,
            pilot_trials: 200,
            alpha_target: Some(alpha),
            policy: PolicyKind::HalfTraceValue,
            seed: 5,
            ..Default::default()
        };
        let csv = execute(&cfg)?.csv;
        Ok((summary(&csv, 0, "recall_pz").0, summary(&csv, 0, "recall").0, resolved(&csv, "beta")))
    };
    let alpha = 0.1;
    let (pz_a, flagged_a, beta_a) = run(alpha)?;
    let (pz_h, flagged_h, beta_h) = run(alpha / 2.0)?;
    let ratio = pz_h / pz_a;
    Ok((
        (2.0..=8.0).contains(&ratio),
        format!(
            "certified recall {pz_a:.2} at alpha {alpha} (beta {beta_a:.2}) vs {pz_h:.2} at alpha {} (beta {beta_h:.2}): ratio {ratio:.2} (need [2, 8]); flagged {flagged_a:.1} vs {flagged_h:.1}",
            alpha / 2.0
        ),
    ))
}

fn trace_value_ceiling() -> Outcome {
    let mut scaled = Vec::new();
    for d in [64usize, 256, 1024] {
        let cfg = ExperimentConfig { experiment: ExperimentKind::TraceValue, d, n: 64, trials: 500, pilot_trials: 200, seed: 6, ..Default::default() };
        scaled.push(summary(&execute(&cfg)?.csv, 0, "t_hat_sqrt_n_over_sqrt_d").0);
    }
    let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scaled.iter().copied().fold(0.0, f64::max);
    Ok((lo > 0.0 && hi / lo <= 3.0, format!("T sqrt(n)/sqrt(d) at d = 64, 256, 1024: {scaled:.4?}, spread {:.3} (need <= 3)", hi / lo)))
}

fn card_moments(elapsed: &mut Duration) -> Outcome {
    let start = Instant::now();
    let mut rng = SeedTree::new(7).substream(0, Purpose::Custom(0));
    let instances: Vec<(Vec<f64>, f64)> = (0..10_000)
        .map(|_| {
            let n = rng.random_range(1..=64usize);
            let a = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
            (a, rng.random_range(-(n as f64)..=n as f64))
        })
        .collect();
    let violation = check_card_moments(&instances)?;
    *elapsed = start.elapsed();
    // per-instance tally, to show where violations occur
    let mut by_sign = [0usize; 2];
    for inst in &instances {
        if check_card_moments(std::slice::from_ref(inst))?.is_some() {
            by_sign[usize::from(inst.1 < 0.0)] += 1;
        }
    }
    Ok((
        violation.is_none() && elapsed.as_secs_f64() < 5.0,
        format!(
            "10^4 instances, first violation {violation:?}; violations with beta >= 0: {}, with beta < 0: {}; limit 5 s",
            by_sign[0], by_sign[1]
        ),
    ))
}

fn beta_moment() -> Outcome {
    let mut rng = SeedTree::new(8).substream(0, Purpose::Custom(0));
    let mut ok = true;
    let mut cells = Vec::new();
    for beta in [1.0, 4.0, 16.0] {
        for gamma in [0.25, 1.0] {
            let c = check_beta_abs_moment(beta, gamma, 100_000, &mut rng)?;
            ok &= c.pass;
            cells.push(format!("({beta},{gamma}): {:.4} >= {:.4}", c.estimate.mean, c.bound));
        }
    }
    Ok((ok, cells.join(", ")))
}

fn null_calibration() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for xi in [0.01, 0.05] {
        let m = 10_000;
        let cfg = ExperimentConfig { d: 1024, n: 64, xi, m, trials: 20, beta: Some(4.0), seed: 9, ..Default::default() };
        let (fpr, _) = summary(&execute(&cfg)?.csv, 0, "soundness");
        let cap = xi + 3.0 * (xi * (1.0 - xi) / m as f64).sqrt();
        ok &= fpr <= cap;
        parts.push(format!("xi {xi}: held-out FPR {fpr:.5} (cap {cap:.5}, 20 trials x M = {m})"));
    }
    Ok((ok, parts.join("; ")))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir()?;
    let out = dir.path().join("run.csv");
    let small = ExperimentConfig { d: 64, n: 20, m: 200, trials: 40, pilot_trials: 30, seed: 10, output: out.clone(), ..Default::default() };
    let configs = [
        ExperimentConfig { experiment: ExperimentKind::Verify, ..small.clone() },
        ExperimentConfig { experiment: ExperimentKind::Trace, ..small.clone() },
        ExperimentConfig { experiment: ExperimentKind::DpAudit, ..small.clone() },
        ExperimentConfig { experiment: ExperimentKind::Sweep, sweep_epsilons: vec![0.5, 2.0], ..small.clone() },
        ExperimentConfig { experiment: ExperimentKind::TraceValue, ..small.clone() },
        ExperimentConfig { experiment: ExperimentKind::Trace, policy: PolicyKind::HalfTraceValue, learner: LearnerKind::GaussianDp, ..small },
    ];
    let mut mismatches = Vec::new();
    for cfg in &configs {
        let mut bytes = Vec::new();
        for threads in [1, 8] {
            run_with_threads(cfg, Some(threads))?;
            bytes.push(std::fs::read(&out)?);
        }
        if bytes[0] != bytes[1] {
            mismatches.push(cfg.experiment.as_str());
        }
    }
    Ok((mismatches.is_empty(), format!("{} configs at 1 and 8 threads, mismatches {mismatches:?}", configs.len())))
}

fn main() {
    let mut t1 = Duration::ZERO;
    let mut t7 = Duration::ZERO;
    let criteria: Vec<Criterion> = vec![
        ("sparse fingerprinting identity grid", Box::new(|| sparse_identity(&mut t1))),
        ("closed-form anchor 2b/(2b+1)", Box::new(closed_form_anchor)),
        ("scaling-matrix identity grid", Box::new(scaling_identity)),
        ("phase transition ERM vs Gaussian mechanism", Box::new(phase_transition)),
        ("recall scaling with accuracy", Box::new(recall_alpha_scaling)),
        ("trace-value ceiling", Box::new(trace_value_ceiling)),
        ("card-moments inequality", Box::new(|| card_moments(&mut t7))),
        ("beta absolute-moment bound", Box::new(beta_moment)),
        ("null-quantile calibration", Box::new(null_calibration)),
        ("determinism across thread counts", Box::new(determinism)),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failures += usize::from(!ok);
        println!("[{}] {:>2} {name}: {detail} ({:.1} s)", if ok { "PASS" } else { "FAIL" }, i + 1, start.elapsed().as_secs_f64());
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
