//! Converting a large score sum into a count of large scores, and the beta
//! prior's absolute moment bound.
//!
//! ```bash
//! cargo run --example anti_concentration
//! ```

use sco_trace::oracles::{card_moments_bound, check_beta_abs_moment, check_card_moments};
use sco_trace::rng::{Purpose, SeedTree};
use sco_trace::tracers::recall_lower_bound_pz;

fn main() -> sco_trace::Result<()> {
    let scores = [0.9, 0.7, 0.8, -0.2, 0.6, 0.1, 0.75, -0.4];
    let lambda = 0.25;
    let count = scores.iter().filter(|&&s| s >= lambda).count();
    println!("{count} scores >= {lambda}; certified lower bound {:.3}", recall_lower_bound_pz(&scores, lambda));

    let instances = vec![(scores.to_vec(), 2.0), (vec![1.0; 5], 0.0), (vec![1.0, -0.1], -2.0)];
    for (a, beta) in &instances {
        println!("beta = {beta:>4}: bound {:.3}", card_moments_bound(a, *beta));
    }
    // the last instance has beta < 0, where the bound can exceed the count
    println!("first violation: {:?}", check_card_moments(&instances)?);

    let mut rng = SeedTree::new(9).substream(0, Purpose::Custom(0));
    for (beta, gamma) in [(1.0, 1.0), (9.0, 0.5), (100.0, 1.0)] {
        let c = check_beta_abs_moment(beta, gamma, 50_000, &mut rng)?;
        println!("beta {beta:>5}, gamma {gamma}: E|X| = {:.4} vs bound {:.4} -> {}", c.estimate.mean, c.bound, if c.pass { "ok" } else { "violated" });
    }
    Ok(())
}
