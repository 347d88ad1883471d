//! Exact checks of the fingerprinting identities and anti-concentration
//! bounds on small instances, plus their Monte Carlo counterparts.
//!
//! The identity oracles enumerate every dataset and integrate the prior one
//! coordinate at a time. The pmf factorizes over coordinates, so each side is
//! a sum over datasets of products of one-dimensional polynomial integrals,
//! which Gauss–Jacobi quadrature evaluates exactly.

use rand::Rng;

use crate::distributions::{
    binomial, prior_quadrature, sample_prior, sample_sparse, BetaPrior, QuadratureRule, SparsePopulation, TernarySample,
};
use crate::error::{invalid, Error, Result};
use crate::learners::Dataset;
use crate::problems::{support_argmax, ProblemSpec};
use crate::stats::Estimate;

/// Largest `datasets × coins` product the identity oracles will enumerate.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

/// Tolerance used by the oracle grids.
pub const IDENTITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheckResult {
    pub lhs: f64,
    pub rhs: f64,
    pub rel_error: f64,
    pub instance: String,
}

impl IdentityCheckResult {
    fn new(lhs: f64, rhs: f64, instance: String) -> Self {
        let rel_error = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-300);
        Self { lhs, rhs, rel_error, instance }
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.rel_error <= tol
    }
}

/// A learner whose only randomness is a uniformly chosen coin from a finite set.
pub trait FiniteLearner {
    fn coins(&self) -> usize {
        1
    }

    fn output(&self, data: &Dataset, coin: usize) -> Vec<f64>;
}

impl<F: Fn(&Dataset) -> Vec<f64>> FiniteLearner for F {
    fn output(&self, data: &Dataset, _coin: usize) -> Vec<f64> {
        self(data)
    }
}

/// A randomized learner given as `f(data, coin)` over `coins` equally likely coins.
pub struct CoinLearner<F> {
    pub coins: usize,
    pub f: F,
}

impl<F: Fn(&Dataset, usize) -> Vec<f64>> FiniteLearner for CoinLearner<F> {
    fn coins(&self) -> usize {
        self.coins
    }

    fn output(&self, data: &Dataset, coin: usize) -> Vec<f64> {
        (self.f)(data, coin)
    }
}

fn combinations(d: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, d: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for j in start..d {
            cur.push(j);
            rec(j + 1, d, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, d, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Every point of the `k`-sparse ternary data space in dimension `d`.
pub fn sparse_data_space(d: usize, k: usize) -> Vec<TernarySample> {
    let mut out = Vec::new();
    for support in combinations(d, k) {
        for mask in 0..1u32 << k {
            let mut entries = vec![0i8; d];
            for (b, &j) in support.iter().enumerate() {
                entries[j] = if mask >> b & 1 == 1 { 1 } else { -1 };
            }
            out.push(TernarySample::from_entries(entries).expect("entries are ternary"));
        }
    }
    out
}

/// Polynomial pieces of one identity, as functions of a single coordinate `mu`:
/// the pmf factor `w(z, mu)` of a sample with `z` on that coordinate, and the
/// per-sample score term `s(z, mu)` already multiplied by `w(z, mu)`.
struct IdentityForm<'a> {
    weight: &'a dyn Fn(f64, f64) -> f64,
    score: &'a dyn Fn(f64, f64) -> f64,
    /// `C(d, k)^(-1)`, the support-selection probability of each sample.
    support_prob: f64,
    /// Constant multiplying `E<mu, E θ̂>` on the right-hand side.
    rhs_factor: f64,
}

fn enumerate_identity(
    space: &[TernarySample],
    d: usize,
    n: usize,
    rule: &QuadratureRule,
    form: &IdentityForm,
    learner: &dyn FiniteLearner,
) -> Result<(f64, f64)> {
    let coins = learner.coins().max(1);
    let datasets = (space.len() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    let terms = datasets.saturating_mul(coins as u128);
    if terms > ENUMERATION_LIMIT {
        return Err(Error::ResourceLimit { terms, limit: ENUMERATION_LIMIT });
    }
    let norm = form.support_prob.powi(n as i32);
    let mut idx = vec![0usize; n];
    let (mut lhs, mut rhs) = (0.0, 0.0);
    // per coordinate: values z_ij of the samples whose support contains j, with their sample index
    let mut column: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(n); d];
    for _ in 0..datasets {
        let samples: Vec<TernarySample> = idx.iter().map(|&i| space[i].clone()).collect();
        for c in column.iter_mut() {
            c.clear();
        }
        for (i, z) in samples.iter().enumerate() {
            for &j in z.support() {
                column[j].push((i, z.get(j)));
            }
        }
        let data = Dataset::new(samples)?;
        let mut theta = vec![0.0; d];
        for coin in 0..coins {
            for (t, o) in theta.iter_mut().zip(learner.output(&data, coin)) {
                *t += o / coins as f64;
            }
        }
        let mass: Vec<f64> = column
            .iter()
            .map(|c| rule.integrate(|mu| c.iter().map(|&(_, z)| (form.weight)(z, mu)).product()))
            .collect();
        for j in 0..d {
            if theta[j] == 0.0 {
                continue;
            }
            let others: f64 = (0..d).filter(|&l| l != j).map(|l| mass[l]).product();
            let c = &column[j];
            let score: f64 = c
                .iter()
                .map(|&(i, zi)| {
                    rule.integrate(|mu| {
                        (form.score)(zi, mu) * c.iter().filter(|&&(i2, _)| i2 != i).map(|&(_, z)| (form.weight)(z, mu)).product::<f64>()
                    })
                })
                .sum();
            let corr = rule.integrate(|mu| mu * c.iter().map(|&(_, z)| (form.weight)(z, mu)).product::<f64>());
            lhs += theta[j] * others * score;
            rhs += theta[j] * others * corr;
        }
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot < space.len() {
                break;
            }
            *slot = 0;
        }
    }
    Ok((norm * lhs, form.rhs_factor * norm * rhs))
}

/// Exact check of `E Σ_i φ_mu(θ̂, Z_i) = (2 beta d / k) E<mu, E θ̂>` for the
/// unscaled sparse score `φ_mu(θ, z) = Σ_{j ∈ supp z} θ_j (z_j - (d/k) mu_j)`
/// under the prior on `[-k/d, k/d]^d`.
pub fn verify_sparse_identity(d: usize, k: usize, n: usize, beta: f64, learner: &dyn FiniteLearner) -> Result<IdentityCheckResult> {
    if !(1..=4).contains(&d) || k == 0 || k > d || !(1..=3).contains(&n) {
        return invalid(format!("need 1 <= d <= 4, 1 <= k <= d, 1 <= n <= 3; got d={d}, k={k}, n={n}"));
    }
    if !(beta >= 1.0 && beta.is_finite()) {
        return invalid(format!("beta must be >= 1, got {beta}"));
    }
    let a = d as f64 / k as f64;
    let prior = BetaPrior::new(beta, 1.0 / a, d)?;
    let rule = prior_quadrature(&prior, n + 2)?;
    let weight = move |z: f64, mu: f64| (1.0 + a * mu * z) / 2.0;
    let score = move |z: f64, mu: f64| (z - a * mu) * (1.0 + a * mu * z) / 2.0;
    let form = IdentityForm { weight: &weight, score: &score, support_prob: 1.0 / binomial(d, k), rhs_factor: 2.0 * beta * a };
    let (lhs, rhs) = enumerate_identity(&sparse_data_space(d, k), d, n, &rule, &form, learner)?;
    Ok(IdentityCheckResult::new(lhs, rhs, format!("sparse d={d} k={k} n={n} beta={beta}")))
}

/// Exact check of `E Σ_i <θ̂, Λ_mu (Z_i - mu)> = (2 beta / gamma²) E<mu, E θ̂>`
/// on `{±1}^d` with `Λ_jj = (1 - (mu_j/gamma)²) / (1 - mu_j²)`.
///
/// Since `(z - mu)(1 + z mu) = (1 - mu²) z` for `z = ±1`, each score term
/// times its pmf factor is the polynomial `(1 - (mu/gamma)²) z / 2`.
pub fn verify_scaling_identity(d: usize, n: usize, beta: f64, gamma: f64, learner: &dyn FiniteLearner) -> Result<IdentityCheckResult> {
    if !(1..=3).contains(&d) || !(1..=3).contains(&n) {
        return invalid(format!("need 1 <= d <= 3 and 1 <= n <= 3; got d={d}, n={n}"));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return invalid(format!("gamma must lie in (0, 1], got {gamma}"));
    }
    let prior = BetaPrior::new(beta, gamma, d)?;
    let rule = prior_quadrature(&prior, n + 3)?;
    let weight = |z: f64, mu: f64| (1.0 + mu * z) / 2.0;
    let score = move |z: f64, mu: f64| (1.0 - (mu / gamma).powi(2)) * z / 2.0;
    let form = IdentityForm { weight: &weight, score: &score, support_prob: 1.0, rhs_factor: 2.0 * beta / (gamma * gamma) };
    let (lhs, rhs) = enumerate_identity(&sparse_data_space(d, d), d, n, &rule, &form, learner)?;
    Ok(IdentityCheckResult::new(lhs, rhs, format!("scaling d={d} n={n} beta={beta} gamma={gamma}")))
}

fn monte_carlo_lhs<R: Rng + ?Sized>(
    prior: &BetaPrior,
    k: usize,
    n: usize,
    draws: usize,
    learner: &dyn FiniteLearner,
    score: impl Fn(&[f64], &[f64], &TernarySample) -> f64,
    rng: &mut R,
) -> Result<Estimate> {
    let coins = learner.coins().max(1);
    let mut values = Vec::with_capacity(draws);
    for _ in 0..draws {
        let mu = sample_prior(prior, rng);
        let pop = SparsePopulation::new(mu.clone(), k)?;
        let data = Dataset::new((0..n).map(|_| sample_sparse(&pop, rng)).collect())?;
        let theta = learner.output(&data, rng.random_range(0..coins));
        values.push(data.samples().iter().map(|z| score(&theta, mu.values(), z)).sum());
    }
    Ok(Estimate::from_samples(&values))
}

/// Monte Carlo estimate of the left-hand side of [`verify_sparse_identity`].
pub fn sparse_identity_monte_carlo<R: Rng + ?Sized>(
    d: usize,
    k: usize,
    n: usize,
    beta: f64,
    learner: &dyn FiniteLearner,
    draws: usize,
    rng: &mut R,
) -> Result<Estimate> {
    let a = d as f64 / k as f64;
    let prior = BetaPrior::new(beta, 1.0 / a, d)?;
    monte_carlo_lhs(&prior, k, n, draws, learner, |t, mu, z| z.support().iter().map(|&j| t[j] * (z.get(j) - a * mu[j])).sum(), rng)
}

/// Monte Carlo estimate of the left-hand side of [`verify_scaling_identity`].
pub fn scaling_identity_monte_carlo<R: Rng + ?Sized>(
    d: usize,
    n: usize,
    beta: f64,
    gamma: f64,
    learner: &dyn FiniteLearner,
    draws: usize,
    rng: &mut R,
) -> Result<Estimate> {
    let prior = BetaPrior::new(beta, gamma, d)?;
    let score = |t: &[f64], mu: &[f64], z: &TernarySample| {
        (0..z.dim())
            .map(|j| {
                let lambda = (1.0 - (mu[j] / gamma).powi(2)) / (1.0 - mu[j] * mu[j]);
                t[j] * lambda * (z.get(j) - mu[j])
            })
            .sum()
    };
    monte_carlo_lhs(&prior, d, n, draws, learner, score, rng)
}

/// Empirical mean clipped to `[-1, 1]^d`.
pub fn clipped_mean(data: &Dataset) -> Vec<f64> {
    data.empirical_mean().into_iter().map(|x| x.clamp(-1.0, 1.0)).collect()
}

/// Box vertex aligned with the empirical mean (`ℓ2` box, ties to `+`).
pub fn mean_sign_vertex(data: &Dataset) -> Vec<f64> {
    let d = data.d();
    let spec = ProblemSpec::box_lp(d, 2.0, d).expect("valid box problem");
    support_argmax(&spec, &data.empirical_mean()).expect("dimensions agree").theta().to_vec()
}

/// Coordinatewise cube of the empirical mean.
pub fn cubed_mean(data: &Dataset) -> Vec<f64> {
    data.empirical_mean().into_iter().map(|x| x * x * x).collect()
}

pub type NamedLearner = (&'static str, fn(&Dataset) -> Vec<f64>);

/// The deterministic learners the identity grids run against.
pub fn grid_learners() -> [NamedLearner; 3] {
    [("clipped_mean", clipped_mean), ("mean_sign_vertex", mean_sign_vertex), ("cubed_mean", cubed_mean)]
}

fn labelled(mut r: IdentityCheckResult, name: &str) -> IdentityCheckResult {
    r.instance = format!("{} learner={name}", r.instance);
    r
}

/// Sparse identity over `d ∈ {1,2,3}`, `k ∈ {1..d}`, `n ∈ {1,2}`, `beta ∈ {1,2,5}` and every grid learner.
pub fn sparse_identity_grid() -> Result<Vec<IdentityCheckResult>> {
    let mut out = Vec::new();
    for d in 1..=3 {
        for k in 1..=d {
            for n in 1..=2 {
                for beta in [1.0, 2.0, 5.0] {
                    for (name, f) in grid_learners() {
                        out.push(labelled(verify_sparse_identity(d, k, n, beta, &f)?, name));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Scaling identity over `d, n ∈ {1,2}`, `beta ∈ {1,3}`, `gamma ∈ {0.3, 0.9}` and every grid learner.
pub fn scaling_identity_grid() -> Result<Vec<IdentityCheckResult>> {
    let mut out = Vec::new();
    for d in 1..=2 {
        for n in 1..=2 {
            for beta in [1.0, 3.0] {
                for gamma in [0.3, 0.9] {
                    for (name, f) in grid_learners() {
                        out.push(labelled(verify_scaling_identity(d, n, beta, gamma, &f)?, name));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// With `k = d` and `gamma = 1` the two identities coincide. Each result
/// compares the sparse oracle's left side (`lhs`) to the scaling oracle's (`rhs`).
pub fn dense_agreement_grid() -> Result<Vec<IdentityCheckResult>> {
    let mut out = Vec::new();
    for d in 1..=2 {
        for n in 1..=2 {
            for beta in [1.0, 3.0] {
                for (name, f) in grid_learners() {
                    let sparse = verify_sparse_identity(d, d, n, beta, &f)?;
                    let scaling = verify_scaling_identity(d, n, beta, 1.0, &f)?;
                    out.push(IdentityCheckResult::new(
                        sparse.lhs,
                        scaling.lhs,
                        format!("dense agreement d={d} n={n} beta={beta} learner={name}"),
                    ));
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaAbsMomentCheck {
    pub estimate: Estimate,
    pub bound: f64,
    pub pass: bool,
}

/// Monte Carlo check of `E|X| >= gamma / (3 sqrt(beta))` for one prior coordinate.
pub fn check_beta_abs_moment<R: Rng + ?Sized>(beta: f64, gamma: f64, n_samples: usize, rng: &mut R) -> Result<BetaAbsMomentCheck> {
    if !(beta >= 1.0 && beta.is_finite()) {
        return invalid(format!("the bound is only claimed for beta >= 1, got {beta}"));
    }
    if n_samples < 10_000 {
        return invalid(format!("need at least 10^4 samples, got {n_samples}"));
    }
    let prior = BetaPrior::new(beta, gamma, 1)?;
    let draws: Vec<f64> = (0..n_samples).map(|_| prior.sample_coordinate(rng).abs()).collect();
    let estimate = Estimate::from_samples(&draws);
    let bound = gamma / (3.0 * beta.sqrt());
    Ok(BetaAbsMomentCheck { pass: estimate.upper() >= bound, estimate, bound })
}

/// `(max{A₁ - beta, 0})² / A₂`, with `0/0` read as 0.
pub fn card_moments_bound(a: &[f64], beta: f64) -> f64 {
    let a1: f64 = a.iter().sum();
    let a2: f64 = a.iter().map(|x| x * x).sum();
    if a2 == 0.0 {
        return 0.0;
    }
    let e = (a1 - beta).max(0.0);
    e * e / a2
}

#[derive(Debug, Clone, PartialEq)]
pub struct CardMomentViolation {
    pub index: usize,
    pub count: usize,
    pub bound: f64,
}

/// Checks `|{i : a_i >= beta/n}| >= (max{A₁ - beta, 0})² / A₂` for each
/// `(a, beta)` pair and returns the first violation, if any. The bound is
/// compared with a relative slack of `1e-12` to absorb rounding in `A₁`, `A₂`.
///
/// The inequality holds for `beta >= 0`: the entries below `beta/n` then sum
/// to less than `beta`, and Cauchy–Schwarz finishes. For `beta < 0` that step
/// fails and so can the inequality, e.g. `a = (1, -0.1)`, `beta = -2` gives
/// count 2 against a bound of about 8.3.
pub fn check_card_moments(instances: &[(Vec<f64>, f64)]) -> Result<Option<CardMomentViolation>> {
    if instances.is_empty() {
        return invalid("no instances given");
    }
    for (index, (a, beta)) in instances.iter().enumerate() {
        if a.is_empty() {
            return invalid(format!("instance {index} has an empty vector"));
        }
        let cut = beta / a.len() as f64;
        let count = a.iter().filter(|&&x| x >= cut).count();
        let bound = card_moments_bound(a, *beta);
        if (count as f64) < bound * (1.0 - 1e-12) {
            return Ok(Some(CardMomentViolation { index, count, bound }));
        }
    }
    Ok(None)
}
