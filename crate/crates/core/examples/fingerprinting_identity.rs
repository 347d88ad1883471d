//! Check the sparse and scaling-matrix fingerprinting identities exactly for
//! a custom learner, then compare with a Monte Carlo estimate.
//!
//! ```bash
//! cargo run --release --example fingerprinting_identity
//! ```

use sco_trace::learners::Dataset;
use sco_trace::oracles::{scaling_identity_monte_carlo, sparse_identity_monte_carlo, verify_scaling_identity, verify_sparse_identity, CoinLearner};
use sco_trace::rng::{Purpose, SeedTree};

/// Shrinks the empirical mean toward zero.
fn shrunk_mean(data: &Dataset) -> Vec<f64> {
    data.empirical_mean().into_iter().map(|x| 0.5 * x.tanh()).collect()
}

fn main() -> sco_trace::Result<()> {
    let seeds = SeedTree::new(7);

    let r = verify_sparse_identity(3, 2, 2, 2.0, &shrunk_mean)?;
    println!("{}: lhs {:.12} rhs {:.12} rel_error {:.1e}", r.instance, r.lhs, r.rhs, r.rel_error);
    let mc = sparse_identity_monte_carlo(3, 2, 2, 2.0, &shrunk_mean, 200_000, &mut seeds.substream(0, Purpose::Custom(0)))?;
    println!("  Monte Carlo lhs {:.5} ± {:.5}", mc.mean, mc.ci_half_width);

    let r = verify_scaling_identity(2, 2, 3.0, 0.6, &shrunk_mean)?;
    println!("{}: lhs {:.12} rhs {:.12} rel_error {:.1e}", r.instance, r.lhs, r.rhs, r.rel_error);
    let mc = scaling_identity_monte_carlo(2, 2, 3.0, 0.6, &shrunk_mean, 200_000, &mut seeds.substream(0, Purpose::Custom(1)))?;
    println!("  Monte Carlo lhs {:.5} ± {:.5}", mc.mean, mc.ci_half_width);

    // randomized learners are checked exactly over a finite coin set
    let dropout = CoinLearner {
        coins: 8,
        f: |data: &Dataset, coin: usize| {
            let mean = data.empirical_mean();
            mean.iter().enumerate().map(|(j, x)| if (coin >> (j % 3)) & 1 == 1 { *x } else { 0.0 }).collect()
        },
    };
    let r = verify_sparse_identity(3, 3, 2, 1.0, &dropout)?;
    println!("{} (8 coins): rel_error {:.1e}", r.instance, r.rel_error);
    Ok(())
}
