//! Learners mapping a training sample to a parameter point.
//!
//! All implemented losses are linear, so every learner here is a function of
//! the empirical mean: ERM is the support argmax of the mean, the Gaussian
//! mechanism privatizes the mean and then takes the argmax (post-processing).

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::distributions::{sample_prior, sample_sparse, BetaPrior, MeanVector, SparsePopulation, TernarySample};
use crate::error::{invalid, Result};
use crate::problems::{excess_risk, l2_ball_excess_risk, support_argmax, ParameterPoint, ProblemSpec};
use crate::rng::{Purpose, SeedTree};
use crate::stats::Estimate;

/// An ordered training sample of equal-dimension ternary vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<TernarySample>,
}

impl Dataset {
    pub fn new(samples: Vec<TernarySample>) -> Result<Self> {
        let Some(first) = samples.first() else {
            return invalid("dataset is empty");
        };
        let d = first.dim();
        if let Some(i) = samples.iter().position(|z| z.dim() != d) {
            return invalid(format!("sample {i} has dimension {}, expected {d}", samples[i].dim()));
        }
        Ok(Self { samples })
    }

    /// `n` i.i.d. draws from `pop`.
    pub fn sample<R: Rng + ?Sized>(pop: &SparsePopulation, n: usize, rng: &mut R) -> Result<Self> {
        Self::new((0..n).map(|_| sample_sparse(pop, rng)).collect())
    }

    pub fn samples(&self) -> &[TernarySample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn d(&self) -> usize {
        self.samples[0].dim()
    }

    pub fn empirical_mean(&self) -> Vec<f64> {
        let mut sum = vec![0.0; self.d()];
        for z in &self.samples {
            for &j in z.support() {
                sum[j] += z.get(j);
            }
        }
        let n = self.len() as f64;
        sum.iter_mut().for_each(|s| *s /= n);
        sum
    }

    pub fn max_l0(&self) -> usize {
        self.samples.iter().map(TernarySample::l0).max().unwrap_or(0)
    }

    /// The neighboring dataset with sample `i` replaced by `z`.
    pub fn replaced(&self, i: usize, z: TernarySample) -> Result<Self> {
        if i >= self.len() {
            return invalid(format!("index {i} out of range for {} samples", self.len()));
        }
        let mut samples = self.samples.clone();
        samples[i] = z;
        Self::new(samples)
    }

    fn prefix(&self, m: usize) -> Self {
        Self { samples: self.samples[..m].to_vec() }
    }
}

/// Which learner to run, with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum LearnerConfig {
    /// Empirical risk minimizer: support argmax of the empirical mean.
    ErmLinear,
    /// ERM on a Gaussian-mechanism-privatized empirical mean.
    GaussianDp { epsilon: f64, delta: f64 },
    /// ERM on the first `m` samples only.
    Subsample { m: usize },
    /// `mean / ‖mean‖₂`, targeting the unit `ℓ2` ball.
    NormalizedMeanL2,
    /// Ignores the data.
    Constant(ParameterPoint),
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LearnerConfig::GaussianDp { epsilon, delta } => {
                if !(epsilon > 0.0 && epsilon <= 10.0) {
                    return invalid(format!("epsilon must lie in (0, 10], got {epsilon}"));
                }
                if !(delta > 0.0 && delta < 1.0) {
                    return invalid(format!("delta must lie in (0, 1), got {delta}"));
                }
                Ok(())
            }
            LearnerConfig::Subsample { m: 0 } => invalid("subsample size must be >= 1"),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LearnerConfig::ErmLinear => "erm",
            LearnerConfig::GaussianDp { .. } => "gaussian-dp",
            LearnerConfig::Subsample { .. } => "subsample",
            LearnerConfig::NormalizedMeanL2 => "normalized-mean",
            LearnerConfig::Constant(_) => "constant",
        }
    }
}

/// Classical Gaussian mechanism: `sigma = Δ₂ · sqrt(2 ln(1.25/δ)) / ε`.
///
/// The calibration is proven for `ε <= 1` and is conservative beyond it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMechanism {
    sigma: f64,
}

impl GaussianMechanism {
    pub fn calibrate(epsilon: f64, delta: f64, l2_sensitivity: f64) -> Self {
        Self { sigma: l2_sensitivity * (2.0 * (1.25 / delta).ln()).sqrt() / epsilon }
    }

    /// Mechanism for the empirical mean of `n` points with at most `k_max` nonzero `±1`
    /// entries each; replacing one point moves the mean by at most `2 sqrt(k_max) / n` in `ℓ2`.
    pub fn for_mean(epsilon: f64, delta: f64, k_max: usize, n: usize) -> Self {
        Self::calibrate(epsilon, delta, mean_sensitivity(k_max, n))
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn privatize<R: Rng + ?Sized>(&self, stat: &[f64], rng: &mut R) -> Vec<f64> {
        stat.iter()
            .map(|&x| {
                let g: f64 = rng.sample(StandardNormal);
                x + self.sigma * g
            })
            .collect()
    }
}

/// Replace-one `ℓ2` sensitivity of the empirical mean.
pub fn mean_sensitivity(k_max: usize, n: usize) -> f64 {
    2.0 * (k_max as f64).sqrt() / n as f64
}

pub fn train<R: Rng + ?Sized>(cfg: &LearnerConfig, spec: &ProblemSpec, data: &Dataset, rng: &mut R) -> Result<ParameterPoint> {
    cfg.validate()?;
    if data.is_empty() {
        return invalid("dataset is empty");
    }
    if data.d() != spec.d() {
        return invalid(format!("data dimension {} does not match problem dimension {}", data.d(), spec.d()));
    }
    match cfg {
        LearnerConfig::ErmLinear => support_argmax(spec, &data.empirical_mean()),
        LearnerConfig::GaussianDp { epsilon, delta } => {
            let mech = GaussianMechanism::for_mean(*epsilon, *delta, spec.data_sparsity(), data.len());
            let noisy = mech.privatize(&data.empirical_mean(), rng);
            support_argmax(spec, &noisy)
        }
        LearnerConfig::Subsample { m } => {
            if *m > data.len() {
                return invalid(format!("subsample size {m} exceeds dataset size {}", data.len()));
            }
            support_argmax(spec, &data.prefix(*m).empirical_mean())
        }
        LearnerConfig::NormalizedMeanL2 => {
            let mean = data.empirical_mean();
            let norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
            let theta = if norm < 1e-12 { vec![0.0; mean.len()] } else { mean.iter().map(|x| x / norm).collect() };
            Ok(ParameterPoint::in_l2_ball(theta))
        }
        LearnerConfig::Constant(point) => {
            if point.dim() != spec.d() {
                return invalid(format!("fixed point has dimension {}, problem has {}", point.dim(), spec.d()));
            }
            Ok(point.clone())
        }
    }
}

/// Excess risk of a learner output, measured over the set the learner targets
/// (the unit `ℓ2` ball for [`LearnerConfig::NormalizedMeanL2`], the problem's set otherwise).
pub fn learner_excess_risk(cfg: &LearnerConfig, spec: &ProblemSpec, theta: &ParameterPoint, mu: &MeanVector) -> Result<f64> {
    match cfg {
        LearnerConfig::NormalizedMeanL2 => l2_ball_excess_risk(theta, mu),
        _ => excess_risk(spec, theta, mu),
    }
}

/// Draws `mu` from the prior, clamped into the box of admissible means, and builds the population.
pub fn draw_population<R: Rng + ?Sized>(spec: &ProblemSpec, prior: &BetaPrior, rng: &mut R) -> Result<SparsePopulation> {
    if prior.d() != spec.d() {
        return invalid(format!("prior dimension {} does not match problem dimension {}", prior.d(), spec.d()));
    }
    let mu = sample_prior(prior, rng);
    let bound = spec.mean_bound();
    let mu = if prior.gamma() > bound { MeanVector::clamped(mu.into_values(), bound)? } else { mu };
    spec.population(mu)
}

/// Bayesian-average excess risk over `trials` independent (prior, sample, learner) draws.
pub fn measure_excess_risk(
    cfg: &LearnerConfig,
    spec: &ProblemSpec,
    prior: &BetaPrior,
    n: usize,
    trials: usize,
    seeds: &SeedTree,
) -> Result<Estimate> {
    if trials < 30 {
        return invalid(format!("need at least 30 trials, got {trials}"));
    }
    if n == 0 {
        return invalid("sample size must be >= 1");
    }
    cfg.validate()?;
    let risks = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let pop = draw_population(spec, prior, &mut seeds.substream(t, Purpose::Prior))?;
            let data = Dataset::sample(&pop, n, &mut seeds.substream(t, Purpose::Train))?;
            let theta = train(cfg, spec, &data, &mut seeds.substream(t, Purpose::Learner))?;
            learner_excess_risk(cfg, spec, &theta, pop.mu())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Estimate::from_samples(&risks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::MeanVector;

    fn z(e: &[i8]) -> TernarySample {
        TernarySample::from_entries(e.to_vec()).unwrap()
    }

    fn seeds() -> SeedTree {
        SeedTree::new(2024)
    }

    #[test]
    fn erm_example_uses_positive_tie_rule() {
        let spec = ProblemSpec::box_lp(2, 2.0, 2).unwrap();
        let data = Dataset::new(vec![z(&[1, 1]), z(&[1, -1])]).unwrap();
        assert_eq!(data.empirical_mean(), vec![1.0, 0.0]);
        let theta = train(&LearnerConfig::ErmLinear, &spec, &data, &mut seeds().substream(0, Purpose::Learner)).unwrap();
        let r = 0.5f64.sqrt();
        assert_eq!(theta.theta(), &[r, r]);
        assert!(theta.feasible());
    }

    #[test]
    fn gaussian_sigma_formula() {
        let (k, n) = (16usize, 100usize);
        let mech = GaussianMechanism::for_mean(1.0, 1e-5, k, n);
        let expected = (2.0 * 4.0 / 100.0) * (2.0 * 125_000f64.ln()).sqrt();
        assert!((mech.sigma() - expected).abs() < 1e-14);
    }

    #[test]
    fn errors() {
        let spec = ProblemSpec::box_lp(2, 2.0, 2).unwrap();
        assert!(Dataset::new(vec![]).is_err());
        assert!(Dataset::new(vec![z(&[1, 1]), z(&[1])]).is_err());
        let data = Dataset::new(vec![z(&[1, 1])]).unwrap();
        let mut rng = seeds().substream(0, Purpose::Learner);
        assert!(train(&LearnerConfig::Subsample { m: 2 }, &spec, &data, &mut rng).is_err());
        assert!(train(&LearnerConfig::GaussianDp { epsilon: 11.0, delta: 1e-5 }, &spec, &data, &mut rng).is_err());
        assert!(train(&LearnerConfig::GaussianDp { epsilon: 1.0, delta: 1.0 }, &spec, &data, &mut rng).is_err());
        let wrong = ProblemSpec::box_lp(3, 2.0, 2).unwrap();
        assert!(train(&LearnerConfig::ErmLinear, &wrong, &data, &mut rng).is_err());
    }

    #[test]
    fn outputs_are_feasible() {
        let tree = seeds();
        let specs = [
            ProblemSpec::box_lp(12, 2.0, 4).unwrap(),
            ProblemSpec::box_lp(12, 3.0, 12).unwrap(),
            ProblemSpec::l1_capped(12, 3).unwrap(),
            ProblemSpec::l1_counterexample(12).unwrap(),
        ];
        let learners = [
            LearnerConfig::ErmLinear,
            LearnerConfig::GaussianDp { epsilon: 0.5, delta: 1e-5 },
            LearnerConfig::Subsample { m: 5 },
            LearnerConfig::Constant(ParameterPoint::zeros(12)),
        ];
        for (si, spec) in specs.iter().enumerate() {
            let prior = BetaPrior::new(2.0, spec.mean_bound(), 12).unwrap();
            for t in 0..20u64 {
                let pop = draw_population(spec, &prior, &mut tree.substream(t, Purpose::Prior)).unwrap();
                let data = Dataset::sample(&pop, 10, &mut tree.substream(t, Purpose::Train)).unwrap();
                for cfg in &learners {
                    let theta = train(cfg, spec, &data, &mut tree.substream(t, Purpose::Learner)).unwrap();
                    assert!(theta.feasible() && spec.contains(theta.theta()), "spec {si} {cfg:?}");
                }
                let l2 = train(&LearnerConfig::NormalizedMeanL2, spec, &data, &mut tree.substream(t, Purpose::Learner)).unwrap();
                assert!(l2.theta().iter().map(|x| x * x).sum::<f64>().sqrt() <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn normalized_mean_degenerate_case() {
        let spec = ProblemSpec::box_lp(2, 2.0, 2).unwrap();
        let data = Dataset::new(vec![z(&[1, -1]), z(&[-1, 1])]).unwrap();
        let t = train(&LearnerConfig::NormalizedMeanL2, &spec, &data, &mut seeds().substream(0, Purpose::Learner)).unwrap();
        assert_eq!(t.theta(), &[0.0, 0.0]);
    }

    #[test]
    fn gaussian_mechanism_sensitivity_on_neighbors() {
        let tree = seeds();
        let spec = ProblemSpec::box_lp(20, 2.0, 5).unwrap();
        let n = 8;
        let bound = mean_sensitivity(5, n);
        let mech = GaussianMechanism::for_mean(1.0, 1e-5, 5, n);
        let pop = spec.population(MeanVector::zeros(20, 0.25).unwrap()).unwrap();
        for t in 0..1000u64 {
            let mut rng = tree.substream(t, Purpose::Train);
            let data = Dataset::sample(&pop, n, &mut rng).unwrap();
            let i = rng.random_range(0..n);
            let other = data.replaced(i, sample_sparse(&pop, &mut rng)).unwrap();
            let a = mech.privatize(&data.empirical_mean(), &mut tree.substream(t, Purpose::Learner));
            let b = mech.privatize(&other.empirical_mean(), &mut tree.substream(t, Purpose::Learner));
            let dist = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            assert!(dist <= bound + 1e-12, "trial {t}: {dist} > {bound}");
        }
    }

    #[test]
    fn erm_risk_identity() {
        // ERM excess risk equals k^{-1/q}(d^{-1/p}‖mu‖₁ - <θ,mu>), and the learner
        // inequality <mu,θ> >= d^{-1/p}‖mu‖₁ - k^{1/q} α is tight at the realized α.
        let tree = seeds();
        let (d, p, k) = (10usize, 3.0f64, 4usize);
        let spec = ProblemSpec::box_lp(d, p, k).unwrap();
        let prior = BetaPrior::new(1.5, spec.mean_bound(), d).unwrap();
        let q = p / (p - 1.0);
        for t in 0..50u64 {
            let pop = draw_population(&spec, &prior, &mut tree.substream(t, Purpose::Prior)).unwrap();
            let data = Dataset::sample(&pop, 7, &mut tree.substream(t, Purpose::Train)).unwrap();
            let theta = train(&LearnerConfig::ErmLinear, &spec, &data, &mut tree.substream(t, Purpose::Learner)).unwrap();
            let mu = pop.mu();
            let alpha = excess_risk(&spec, &theta, mu).unwrap();
            let sup = (d as f64).powf(-1.0 / p) * mu.l1_norm();
            let closed = (k as f64).powf(-1.0 / q) * (sup - theta.dot(mu.values()));
            assert!((alpha - closed).abs() < 1e-12);
            assert!((theta.dot(mu.values()) - (sup - (k as f64).powf(1.0 / q) * alpha)).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_zero_risk_is_half_under_uniform_prior() {
        let d = 8;
        let spec = ProblemSpec::box_lp(d, 2.0, d).unwrap();
        let prior = BetaPrior::new(1.0, 1.0, d).unwrap();
        let est = measure_excess_risk(&LearnerConfig::Constant(ParameterPoint::zeros(d)), &spec, &prior, 4, 2000, &seeds()).unwrap();
        assert!((est.mean - 0.5).abs() <= est.ci_half_width, "{est:?}");
    }

    #[test]
    fn erm_risk_decreases_with_n() {
        let d = 16;
        let spec = ProblemSpec::box_lp(d, 2.0, d).unwrap();
        let prior = BetaPrior::new(1.0, 1.0, d).unwrap();
        let risks: Vec<f64> = [64, 512, 4096]
            .iter()
            .map(|&n| measure_excess_risk(&LearnerConfig::ErmLinear, &spec, &prior, n, 60, &seeds()).unwrap().mean)
            .collect();
        assert!(risks[0] > risks[1] && risks[1] > risks[2], "{risks:?}");
    }

    #[test]
    fn dp_costs_accuracy() {
        let d = 32;
        let spec = ProblemSpec::box_lp(d, 2.0, d).unwrap();
        let prior = BetaPrior::new(1.0, 1.0, d).unwrap();
        let erm = measure_excess_risk(&LearnerConfig::ErmLinear, &spec, &prior, 200, 200, &seeds()).unwrap();
        let dp = measure_excess_risk(&LearnerConfig::GaussianDp { epsilon: 0.5, delta: 1e-5 }, &spec, &prior, 200, 200, &seeds())
            .unwrap();
        assert!(dp.lower() > erm.upper(), "dp {dp:?} erm {erm:?}");
    }

    #[test]
    fn measure_requires_enough_trials() {
        let spec = ProblemSpec::box_lp(2, 2.0, 2).unwrap();
        let prior = BetaPrior::new(1.0, 1.0, 2).unwrap();
        assert!(measure_excess_risk(&LearnerConfig::ErmLinear, &spec, &prior, 5, 29, &seeds()).is_err());
    }
}
