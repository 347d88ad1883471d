//! The trace value of ERM grows like `sqrt(d / n)`: print `T sqrt(n/d)` over a grid.
//!
//! ```bash
//! cargo run --release --example trace_value_scaling
//! ```

use sco_trace::distributions::BetaPrior;
use sco_trace::learners::LearnerConfig;
use sco_trace::problems::ProblemSpec;
use sco_trace::rng::SeedTree;
use sco_trace::tracers::{estimate_trace_value, TraceSetup, TracerKind};

fn main() -> sco_trace::Result<()> {
    println!("{:>6} {:>6} {:>10} {:>14}", "d", "n", "T", "T sqrt(n/d)");
    for d in [64, 256, 1024] {
        for n in [16, 64, 256] {
            let setup = TraceSetup {
                learner: LearnerConfig::ErmLinear,
                spec: ProblemSpec::box_lp(d, 2.0, d)?,
                tracer: TracerKind::SparseScore,
                prior: BetaPrior::new(100.0, 1.0, d)?,
                n,
            };
            let t = estimate_trace_value(&setup, 200, &SeedTree::new(5))?;
            println!("{d:>6} {n:>6} {:>10.4} {:>14.4}", t.mean, t.mean * (n as f64 / d as f64).sqrt());
        }
    }
    Ok(())
}
