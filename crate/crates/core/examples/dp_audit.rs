//! Audit the Gaussian-mechanism learner: no tracer can flag more than
//! `n e^eps xi + n delta` training points on average at false-positive rate `xi`.
//!
//! ```bash
//! cargo run --release --example dp_audit
//! ```

use sco_trace::harness::{execute, ExperimentConfig, ExperimentKind};

fn main() {
    for epsilon in [0.25, 1.0, 4.0] {
        let cfg = ExperimentConfig {
            experiment: ExperimentKind::DpAudit,
            d: 512,
            n: 100,
            m: 500,
            trials: 100,
            epsilon,
            xi: 0.05,
            beta: Some(20.0),
            seed: 3,
            ..Default::default()
        };
        match execute(&cfg) {
            Ok(out) => {
                println!("epsilon = {epsilon}");
                for line in out.summary {
                    println!("  {line}");
                }
            }
            Err(e) => eprintln!("epsilon = {epsilon}: {e}"),
        }
    }
}
