//! Draw a mean from the beta prior, sample sparse data and compare moments.
//!
//! ```bash
//! cargo run --example sparse_sampling
//! ```

use sco_trace::distributions::{sample_sparse, BetaPrior};
use sco_trace::learners::{draw_population, Dataset};
use sco_trace::problems::ProblemSpec;
use sco_trace::rng::{Purpose, SeedTree};

fn main() -> sco_trace::Result<()> {
    let (d, k, n) = (12, 3, 20_000);
    let spec = ProblemSpec::box_lp(d, 2.0, k)?;
    let prior = BetaPrior::new(2.0, spec.mean_bound(), d)?;
    let seeds = SeedTree::new(2024);

    let pop = draw_population(&spec, &prior, &mut seeds.substream(0, Purpose::Prior))?;
    let data = Dataset::sample(&pop, n, &mut seeds.substream(0, Purpose::Train))?;
    println!("d = {d}, k = {k}: each sample has {} nonzeros", data.max_l0());
    println!("{:>4} {:>10} {:>10}", "j", "mu", "mean");
    for (j, (m, e)) in pop.mu().values().iter().zip(data.empirical_mean()).enumerate() {
        println!("{j:>4} {m:>10.5} {e:>10.5}");
    }

    let z = sample_sparse(&pop, &mut seeds.substream(1, Purpose::Fresh));
    println!("one fresh sample: {:?}", z.entries());
    println!("E[mu_j^2] = {:.6} (prior second moment)", prior.second_moment());
    Ok(())
}
