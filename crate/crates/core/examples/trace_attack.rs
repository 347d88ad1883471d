//! Trace the training set of ERM on the box problem with a threshold
//! calibrated on fresh data, and report recall and soundness.
//!
//! ```bash
//! cargo run --release --example trace_attack
//! ```

use sco_trace::distributions::BetaPrior;
use sco_trace::learners::LearnerConfig;
use sco_trace::problems::ProblemSpec;
use sco_trace::rng::SeedTree;
use sco_trace::stats::Estimate;
use sco_trace::tracers::{run_trace_trial, ThresholdPolicy, TraceExperiment, TraceSetup, TracerKind};

fn main() -> sco_trace::Result<()> {
    let (d, n) = (1024, 100);
    let spec = ProblemSpec::box_lp(d, 2.0, d)?;
    let exp = TraceExperiment {
        setup: TraceSetup { learner: LearnerConfig::ErmLinear, spec, tracer: TracerKind::SparseScore, prior: BetaPrior::new(50.0, 1.0, d)?, n },
        fresh: 2000,
        policy: ThresholdPolicy::NullQuantile { xi: 0.05 },
    };
    let seeds = SeedTree::new(1);
    let reports = (0..20).map(|t| run_trace_trial(&exp, &seeds, t)).collect::<sco_trace::Result<Vec<_>>>()?;

    let first = &reports[0];
    println!("trial 0: lambda {:.4}, flagged {} of {n}, first flagged {:?}", first.lambda, first.flagged.len(), &first.flagged[..first.flagged.len().min(8)]);
    let recall = Estimate::from_samples(&reports.iter().map(|r| r.recall_estimate).collect::<Vec<_>>());
    let sound = Estimate::from_samples(&reports.iter().map(|r| r.soundness_estimate).collect::<Vec<_>>());
    let risk = Estimate::from_samples(&reports.iter().map(|r| r.excess_risk).collect::<Vec<_>>());
    println!("recall    {:.2} ± {:.2} of {n}", recall.mean, recall.ci_half_width);
    println!("soundness {:.4} ± {:.4} (target 0.05)", sound.mean, sound.ci_half_width);
    println!("ERM excess risk {:.5}", risk.mean);
    Ok(())
}
