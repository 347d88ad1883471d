//! Build an experiment config, save it in the `key = value` format, reload
//! it and run it through the harness, as the CLI does.
//!
//! ```bash
//! cargo run --release --example experiment_config
//! ```

use sco_trace::harness::{run, ExperimentConfig, ExperimentKind, LearnerKind, PolicyKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let cfg = ExperimentConfig {
        experiment: ExperimentKind::Trace,
        d: 256,
        n: 40,
        m: 500,
        trials: 50,
        learner: LearnerKind::Subsample,
        subsample_m: 20,
        policy: PolicyKind::HalfTraceValue,
        seed: 11,
        output: dir.path().join("subsample.csv"),
        ..Default::default()
    };
    let text = cfg.to_text();
    println!("config file:\n{text}");
    let reloaded = ExperimentConfig::parse(&text)?;
    assert_eq!(reloaded, cfg);

    let outcome = run(&reloaded)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    let csv = std::fs::read_to_string(&cfg.output)?;
    println!("\n{} CSV lines; summary rows:", csv.lines().count());
    for line in csv.lines().filter(|l| l.starts_with("#summary")) {
        println!("{line}");
    }
    Ok(())
}
