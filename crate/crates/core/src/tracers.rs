//! Fingerprinting score functions, threshold calibration and tracing trials.
//!
//! A tracer knows the data distribution (its mean `mu`) and scores a
//! candidate point `z` against a learner output `θ`:
//!
//! * sparse score: `(d^(1/p)/sqrt(k)) · Σ_{j ∈ supp z} θ_j (z_j - (d/k) mu_j)`
//! * scaling-matrix score: `sqrt(s) · Σ_j θ_j Λ_jj (z_j - mu_j)` with
//!   `Λ_jj = (1 - (mu_j/gamma)^2) / (1 - mu_j^2)`
//!
//! Both have mean zero on points independent of `θ`. A point is flagged as a
//! training member when its score reaches the threshold `λ`.
//!
//! The tracer is built from the true `mu` of each trial, i.e. it is given the
//! data distribution. A practical attacker would have to estimate `mu`.

use rand::Rng;
use rayon::prelude::*;

use crate::distributions::{sample_sparse, BetaPrior, MeanVector, SparsePopulation, TernarySample};
use crate::error::{invalid, Error, Result};
use crate::learners::{draw_population, learner_excess_risk, train, Dataset, LearnerConfig};
use crate::problems::{Geometry, ParameterPoint, ProblemSpec};
use crate::rng::{Purpose, SeedTree};
use crate::stats::{Estimate, Z95};

/// Minimum size of the independent null sample used by [`ThresholdPolicy::NullQuantile`].
pub const MIN_NULL_SAMPLE: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TracerKind {
    SparseScore,
    ScalingMatrixScore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracerSpec {
    kind: TracerKind,
    mu: MeanVector,
    /// Outer factor: `d^(1/p)/sqrt(k)` or `sqrt(s)`.
    scale: f64,
    /// Per-coordinate centering: `(d/k) mu` or `mu`.
    shift: Vec<f64>,
    /// Diagonal reweighting (all ones for the sparse score).
    weight: Vec<f64>,
    clip_bound: f64,
    k: usize,
}

/// A score together with whether it had to be clamped to the clip bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub value: f64,
    pub clipped: bool,
}

impl TracerSpec {
    /// Sparse score for `k`-sparse data with mean `mu`; clip bound `2 sqrt(k)`.
    pub fn sparse(mu: MeanVector, k: usize, p: f64) -> Result<Self> {
        let d = mu.len();
        if k == 0 || k > d {
            return invalid(format!("sparsity k = {k} must lie in [1, {d}]"));
        }
        if !(p.is_finite() && p >= 1.0) {
            return invalid(format!("p must lie in [1, inf), got {p}"));
        }
        let inflation = d as f64 / k as f64;
        let bound = 1.0 / inflation;
        if let Some(j) = mu.values().iter().position(|m| m.abs() > bound + 1e-12) {
            return invalid(format!("|mu[{j}]| exceeds k/d = {bound}"));
        }
        Ok(Self {
            kind: TracerKind::SparseScore,
            scale: (d as f64).powf(1.0 / p) / (k as f64).sqrt(),
            shift: mu.values().iter().map(|m| inflation * m).collect(),
            weight: vec![1.0; d],
            clip_bound: 2.0 * (k as f64).sqrt(),
            mu,
            k,
        })
    }

    /// Scaling-matrix score for `{±1}^d` data with mean `mu ∈ [-gamma, gamma]^d`;
    /// clip bound `2 sqrt(s)` (exact for `θ` in the `ℓ1` ball, since `0 <= Λ <= 1`).
    pub fn scaling_matrix(mu: MeanVector, gamma: f64, s: usize) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return invalid(format!("gamma must lie in (0, 1], got {gamma}"));
        }
        if s == 0 {
            return invalid("scaling s must be >= 1");
        }
        let mut weight = Vec::with_capacity(mu.len());
        for (j, &m) in mu.values().iter().enumerate() {
            if m.abs() >= 1.0 {
                return Err(Error::Singularity { coordinate: j });
            }
            if m.abs() > gamma + 1e-12 {
                return invalid(format!("|mu[{j}]| = {} exceeds gamma = {gamma}", m.abs()));
            }
            let r = m / gamma;
            weight.push(((1.0 - r * r) / (1.0 - m * m)).max(0.0));
        }
        let d = mu.len();
        Ok(Self {
            kind: TracerKind::ScalingMatrixScore,
            scale: (s as f64).sqrt(),
            shift: mu.values().to_vec(),
            weight,
            clip_bound: 2.0 * (s as f64).sqrt(),
            mu,
            k: d,
        })
    }

    /// The tracer matching `spec`'s data space for a population with mean `mu`.
    pub fn for_problem(kind: TracerKind, spec: &ProblemSpec, prior_gamma: f64, mu: MeanVector) -> Result<Self> {
        match (kind, spec.geometry()) {
            (TracerKind::SparseScore, Geometry::BoxLp { p, k }) => Self::sparse(mu, k, p),
            (TracerKind::SparseScore, _) => invalid("the sparse score needs a BoxLp problem"),
            (TracerKind::ScalingMatrixScore, g) => {
                if spec.data_sparsity() != spec.d() {
                    return invalid("the scaling-matrix score needs {±1}^d data (k = d)");
                }
                let s = match g {
                    Geometry::L1Capped { s } => s,
                    _ => 1,
                };
                Self::scaling_matrix(mu, prior_gamma, s)
            }
        }
    }

    pub fn kind(&self) -> TracerKind {
        self.kind
    }

    pub fn mu(&self) -> &MeanVector {
        &self.mu
    }

    pub fn clip_bound(&self) -> f64 {
        self.clip_bound
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Diagonal of the scaling matrix (all ones for the sparse score).
    pub fn lambda_diag(&self) -> &[f64] {
        &self.weight
    }

    fn raw(&self, theta: &[f64], z: &TernarySample) -> f64 {
        let sum: f64 = z.support().iter().map(|&j| theta[j] * self.weight[j] * (z.get(j) - self.shift[j])).sum();
        self.scale * sum
    }

    fn check(&self, theta: &ParameterPoint, z: &TernarySample) -> Result<()> {
        let d = self.mu.len();
        if theta.dim() != d || z.dim() != d {
            return invalid(format!("dimension mismatch: tracer {d}, theta {}, sample {}", theta.dim(), z.dim()));
        }
        if z.l0() != self.k {
            return invalid(format!("sample has {} nonzeros, tracer expects {}", z.l0(), self.k));
        }
        Ok(())
    }

    fn clamp(&self, value: f64) -> Score {
        if value.abs() > self.clip_bound {
            Score { value: value.clamp(-self.clip_bound, self.clip_bound), clipped: true }
        } else {
            Score { value, clipped: false }
        }
    }

    pub fn evaluate(&self, theta: &ParameterPoint, z: &TernarySample) -> Result<Score> {
        self.check(theta, z)?;
        Ok(self.clamp(self.raw(theta.theta(), z)))
    }
}

pub fn score_sparse(tr: &TracerSpec, theta: &ParameterPoint, z: &TernarySample) -> Result<f64> {
    if tr.kind != TracerKind::SparseScore {
        return invalid("tracer is not a sparse-score tracer");
    }
    Ok(tr.evaluate(theta, z)?.value)
}

pub fn score_scaling_matrix(tr: &TracerSpec, theta: &ParameterPoint, z: &TernarySample) -> Result<f64> {
    if tr.kind != TracerKind::ScalingMatrixScore {
        return invalid("tracer is not a scaling-matrix tracer");
    }
    Ok(tr.evaluate(theta, z)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdPolicy {
    /// `λ = t_hat / 2`.
    HalfTraceValue { t_hat: f64 },
    /// `λ` is the upper `xi`-quantile of an independent null-score sample.
    NullQuantile { xi: f64 },
}

impl ThresholdPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ThresholdPolicy::HalfTraceValue { t_hat } if !t_hat.is_finite() => invalid("t_hat must be finite"),
            ThresholdPolicy::NullQuantile { xi } if !(xi > 0.0 && xi < 1.0) => invalid(format!("xi must lie in (0, 1), got {xi}")),
            _ => Ok(()),
        }
    }
}

/// Smallest admissible null sample for level `xi`: `ceil(10 / xi)`.
pub fn min_null_sample(xi: f64) -> usize {
    (10.0 / xi - 1e-9).ceil() as usize
}

/// Size of the calibration sample drawn by [`run_trace_trial`]: `max(1000, 10/xi)`.
pub fn null_sample_size(xi: f64) -> usize {
    MIN_NULL_SAMPLE.max(min_null_sample(xi))
}

/// Threshold for `policy`.
///
/// `NullQuantile` returns the smallest null score `v` with at most
/// `floor(xi M)` null scores `>= v` (e.g. `xi = 0.5` on `{1,2,3,4}` gives 3).
/// Without ties this is the order statistic of rank `M - floor(xi M) + 1`;
/// with ties (scores are lattice-valued for sign learners) it moves up to the
/// next distinct value, so flagging `score >= λ` never exceeds `xi` on the null sample.
pub fn calibrate_threshold(policy: &ThresholdPolicy, null_scores: &[f64]) -> Result<f64> {
    policy.validate()?;
    match *policy {
        ThresholdPolicy::HalfTraceValue { t_hat } => Ok(t_hat / 2.0),
        ThresholdPolicy::NullQuantile { xi } => {
            let m = null_scores.len();
            if m < min_null_sample(xi) {
                return invalid(format!("null sample of size {m} is below 10/xi = {}", min_null_sample(xi)));
            }
            let mut sorted = null_scores.to_vec();
            sorted.sort_by(f64::total_cmp);
            let allowed = (xi * m as f64 + 1e-9).floor() as usize;
            if allowed == 0 {
                return Ok(sorted[m - 1].next_up());
            }
            let v = sorted[m - allowed];
            // a tie block straddling the cut would put more than `allowed` scores at or above v
            if sorted[m - allowed - 1] < v {
                return Ok(v);
            }
            Ok(sorted[m - allowed..].iter().copied().find(|&x| x > v).unwrap_or_else(|| sorted[m - 1].next_up()))
        }
    }
}

/// `(max{A₁ - beta, 0})² / A₂`, which lower-bounds `|{i : a_i >= beta/n}|`.
/// Defined as 0 when `A₂ = 0`.
pub fn paley_zygmund_bound(a: &[f64], beta: f64) -> f64 {
    let a1: f64 = a.iter().sum();
    let a2: f64 = a.iter().map(|x| x * x).sum();
    if a2 == 0.0 {
        return 0.0;
    }
    let excess = (a1 - beta).max(0.0);
    excess * excess / a2
}

/// Certified lower bound on the number of scores `>= lambda`.
pub fn recall_lower_bound_pz(scores: &[f64], lambda: f64) -> f64 {
    paley_zygmund_bound(scores, scores.len() as f64 * lambda)
}

/// Everything a tracing trial needs except the threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSetup {
    pub learner: LearnerConfig,
    pub spec: ProblemSpec,
    pub tracer: TracerKind,
    pub prior: BetaPrior,
    /// Training sample size.
    pub n: usize,
}

/// A full tracing experiment: setup, evaluation sample size and threshold policy.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceExperiment {
    pub setup: TraceSetup,
    /// Number of fresh evaluation points `M`.
    pub fresh: usize,
    pub policy: ThresholdPolicy,
}

impl TraceSetup {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return invalid("training sample size n must be >= 1");
        }
        if self.prior.d() != self.spec.d() {
            return invalid("prior and problem dimensions differ");
        }
        self.learner.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceReport {
    pub scores_train: Vec<f64>,
    pub scores_fresh: Vec<f64>,
    pub lambda: f64,
    /// Indices of training points with score `>= lambda`.
    pub flagged: Vec<usize>,
    /// `|flagged|`.
    pub recall_estimate: f64,
    /// Fraction of fresh points with score `>= lambda`.
    pub soundness_estimate: f64,
    /// 95% half-widths for (recall, soundness).
    pub ci_halfwidths: (f64, f64),
    /// Paley–Zygmund lower bound on the flagged count.
    pub recall_pz: f64,
    /// Scores clamped at the clip bound (training, fresh and null combined).
    pub clip_events: usize,
    pub mu_norm_l1: f64,
    pub excess_risk: f64,
}

impl TraceReport {
    /// `(1/n) Σ_i φ(θ̂, Z_i)`, this trial's contribution to the trace value.
    pub fn t_hat_contribution(&self) -> f64 {
        self.scores_train.iter().sum::<f64>() / self.scores_train.len() as f64
    }

    /// Fresh points flagged (false positives).
    pub fn fresh_flags(&self) -> usize {
        self.scores_fresh.iter().filter(|&&s| s >= self.lambda).count()
    }
}

struct TrainedTrial {
    pop: SparsePopulation,
    tracer: TracerSpec,
    theta: ParameterPoint,
    scores: Vec<f64>,
    clips: usize,
}

fn score_all(tracer: &TracerSpec, theta: &ParameterPoint, points: impl Iterator<Item = TernarySample>) -> Result<(Vec<f64>, usize)> {
    let mut clips = 0;
    let scores = points
        .map(|z| {
            let s = tracer.evaluate(theta, &z)?;
            clips += usize::from(s.clipped);
            Ok(s.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((scores, clips))
}

fn fresh_scores<R: Rng + ?Sized>(tracer: &TracerSpec, pop: &SparsePopulation, theta: &ParameterPoint, count: usize, rng: &mut R) -> Result<(Vec<f64>, usize)> {
    score_all(tracer, theta, (0..count).map(|_| sample_sparse(pop, rng)))
}

fn train_and_score(setup: &TraceSetup, seeds: &SeedTree, trial: u64) -> Result<TrainedTrial> {
    let pop = draw_population(&setup.spec, &setup.prior, &mut seeds.substream(trial, Purpose::Prior))?;
    let tracer = TracerSpec::for_problem(setup.tracer, &setup.spec, setup.prior.gamma(), pop.mu().clone())?;
    let data = Dataset::sample(&pop, setup.n, &mut seeds.substream(trial, Purpose::Train))?;
    let theta = train(&setup.learner, &setup.spec, &data, &mut seeds.substream(trial, Purpose::Learner))?;
    let (scores, clips) = score_all(&tracer, &theta, data.samples().iter().cloned())?;
    Ok(TrainedTrial { pop, tracer, theta, scores, clips })
}

/// One tracing trial: draw `mu`, train on `n` points, score them and `M`
/// independent fresh points, calibrate `λ`, and report recall and soundness.
pub fn run_trace_trial(exp: &TraceExperiment, seeds: &SeedTree, trial: u64) -> Result<TraceReport> {
    exp.setup.validate()?;
    exp.policy.validate()?;
    if exp.fresh == 0 {
        return invalid("number of fresh points M must be >= 1");
    }
    let TrainedTrial { pop, tracer, theta, scores, mut clips } = train_and_score(&exp.setup, seeds, trial)?;
    let (scores_fresh, fresh_clips) = fresh_scores(&tracer, &pop, &theta, exp.fresh, &mut seeds.substream(trial, Purpose::Fresh))?;
    clips += fresh_clips;
    let lambda = match exp.policy {
        ThresholdPolicy::NullQuantile { xi } => {
            let (null, null_clips) = fresh_scores(&tracer, &pop, &theta, null_sample_size(xi), &mut seeds.substream(trial, Purpose::Null))?;
            clips += null_clips;
            calibrate_threshold(&exp.policy, &null)?
        }
        ThresholdPolicy::HalfTraceValue { .. } => calibrate_threshold(&exp.policy, &[])?,
    };
    let flagged: Vec<usize> = scores.iter().enumerate().filter(|(_, &s)| s >= lambda).map(|(i, _)| i).collect();
    let n = scores.len() as f64;
    let m = scores_fresh.len() as f64;
    let recall = flagged.len() as f64;
    let soundness = scores_fresh.iter().filter(|&&s| s >= lambda).count() as f64 / m;
    let r = recall / n;
    let ci = (Z95 * (n * r * (1.0 - r)).sqrt(), Z95 * (soundness * (1.0 - soundness) / m).sqrt());
    Ok(TraceReport {
        recall_pz: recall_lower_bound_pz(&scores, lambda),
        excess_risk: learner_excess_risk(&exp.setup.learner, &exp.setup.spec, &theta, pop.mu())?,
        mu_norm_l1: pop.mu().l1_norm(),
        scores_train: scores,
        scores_fresh,
        lambda,
        flagged,
        recall_estimate: recall,
        soundness_estimate: soundness,
        ci_halfwidths: ci,
        clip_events: clips,
    })
}

/// One trial's contribution to the trace value, without any threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceValueRecord {
    /// `(1/n) Σ_i φ(θ̂, Z_i)`.
    pub t_hat_contribution: f64,
    pub mu_norm_l1: f64,
    pub excess_risk: f64,
    pub clip_events: usize,
}

pub fn trace_value_trial(setup: &TraceSetup, seeds: &SeedTree, trial: u64) -> Result<TraceValueRecord> {
    setup.validate()?;
    let t = train_and_score(setup, seeds, trial)?;
    Ok(TraceValueRecord {
        t_hat_contribution: t.scores.iter().sum::<f64>() / t.scores.len() as f64,
        mu_norm_l1: t.pop.mu().l1_norm(),
        excess_risk: learner_excess_risk(&setup.learner, &setup.spec, &t.theta, t.pop.mu())?,
        clip_events: t.clips,
    })
}

/// Per-trial contributions `(1/n) Σ_i φ(θ̂, Z_i)`, in trial order.
pub fn trace_value_samples(setup: &TraceSetup, trials: usize, seeds: &SeedTree) -> Result<Vec<f64>> {
    setup.validate()?;
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let trained = train_and_score(setup, seeds, t)?;
            Ok(trained.scores.iter().sum::<f64>() / trained.scores.len() as f64)
        })
        .collect()
}

/// Plug-in estimate of the trace value for this learner/tracer pair.
pub fn estimate_trace_value(setup: &TraceSetup, trials: usize, seeds: &SeedTree) -> Result<Estimate> {
    if trials < 30 {
        return invalid(format!("need at least 30 trials, got {trials}"));
    }
    Ok(Estimate::from_samples(&trace_value_samples(setup, trials, seeds)?))
}

/// Default prior scale `beta` for the box problem at target accuracy `alpha`:
/// `(k^(1/p) / (6 d^(1/p) alpha))^2`, floored at 1.
pub fn box_prior_beta(d: usize, p: f64, k: usize, alpha: f64) -> f64 {
    let b = (k as f64).powf(1.0 / p) / (6.0 * (d as f64).powf(1.0 / p) * alpha);
    (b * b).max(1.0)
}

/// Default `(beta, gamma)` for the scaling-matrix tracer at accuracy `alpha`:
/// `gamma = min(8 alpha, 1)`, `beta = max(1 + ln(d / (16 max(s, 14))) / 2, 1)`.
pub fn scaling_prior_params(d: usize, s: usize, alpha: f64) -> (f64, f64) {
    let beta = (1.0 + 0.5 * (d as f64 / (16.0 * s.max(14) as f64)).ln()).max(1.0);
    (beta, (8.0 * alpha).min(1.0))
}

/// Heuristic `sup_θ sqrt(Σ_i φ(θ, Z_i)²)` over the box parameter set, by
/// sign-flip coordinate ascent from `starts` random vertices. A lower bound on the true supremum.
pub fn score_norm_sup<R: Rng + ?Sized>(tracer: &TracerSpec, spec: &ProblemSpec, data: &Dataset, starts: usize, rng: &mut R) -> Result<f64> {
    let Geometry::BoxLp { p, .. } = spec.geometry() else {
        return invalid("score-norm heuristic is implemented for BoxLp problems");
    };
    let (n, d) = (data.len(), spec.d());
    if data.d() != d || tracer.mu.len() != d {
        return invalid("dimension mismatch");
    }
    let radius = (d as f64).powf(-1.0 / p);
    // column-major score matrix: a[j * n + i] = ∂φ(θ, Z_i)/∂θ_j
    let mut a = vec![0.0; n * d];
    for (i, z) in data.samples().iter().enumerate() {
        for &j in z.support() {
            a[j * n + i] = tracer.scale * tracer.weight[j] * (z.get(j) - tracer.shift[j]);
        }
    }
    let col_sq: Vec<f64> = (0..d).map(|j| a[j * n..(j + 1) * n].iter().map(|x| x * x).sum()).collect();
    let mut best = 0.0f64;
    for _ in 0..starts.max(1) {
        let mut theta: Vec<f64> = (0..d).map(|_| if rng.random_bool(0.5) { radius } else { -radius }).collect();
        let mut r = vec![0.0; n];
        for (j, &t) in theta.iter().enumerate() {
            for (ri, aij) in r.iter_mut().zip(&a[j * n..(j + 1) * n]) {
                *ri += t * aij;
            }
        }
        for _sweep in 0..200 {
            let mut improved = false;
            for j in 0..d {
                let col = &a[j * n..(j + 1) * n];
                let dot: f64 = col.iter().zip(&r).map(|(x, y)| x * y).sum();
                let t = theta[j];
                // flipping θ_j changes ‖r‖² by 4 t² ‖a_j‖² - 4 t <a_j, r>
                if 4.0 * t * t * col_sq[j] - 4.0 * t * dot > 1e-12 {
                    for (ri, aij) in r.iter_mut().zip(col) {
                        *ri -= 2.0 * t * aij;
                    }
                    theta[j] = -t;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        best = best.max(r.iter().map(|x| x * x).sum::<f64>().sqrt());
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::sample_prior;

    fn z(e: &[i8]) -> TernarySample {
        TernarySample::from_entries(e.to_vec()).unwrap()
    }

    fn mv(v: &[f64], b: f64) -> MeanVector {
        MeanVector::new(v.to_vec(), b).unwrap()
    }

    #[test]
    fn sparse_score_examples() {
        let tr = TracerSpec::sparse(mv(&[0.0; 4], 1.0), 4, 2.0).unwrap();
        assert_eq!(score_sparse(&tr, &ParameterPoint::zeros(4), &z(&[1, -1, 1, 1])).unwrap(), 0.0);
        let spec = ProblemSpec::box_lp(4, 2.0, 4).unwrap();
        let theta = spec.point(vec![0.5; 4]).unwrap();
        assert!((score_sparse(&tr, &theta, &z(&[1, 1, 1, 1])).unwrap() - 2.0).abs() < 1e-15);

        let tr = TracerSpec::sparse(mv(&[0.25, 0.0], 0.5), 1, 2.0).unwrap();
        let r = 0.5f64.sqrt();
        let theta = ProblemSpec::box_lp(2, 2.0, 1).unwrap().point(vec![r, r]).unwrap();
        let got = score_sparse(&tr, &theta, &z(&[1, 0])).unwrap();
        // dense re-evaluation: factor * Σ_j 1[z_j != 0] θ_j (z_j - (d/k) mu_j)
        let (d, k, mu, zz) = (2.0f64, 1.0f64, [0.25, 0.0], [1.0, 0.0]);
        let direct: f64 = (d.sqrt() / k.sqrt())
            * (0..2).filter(|&j| zz[j] != 0.0).map(|j| r * (zz[j] - d / k * mu[j])).sum::<f64>();
        assert!((got - 0.5).abs() < 1e-15 && (got - direct).abs() < 1e-15);
    }

    #[test]
    fn sparse_score_rejects_mismatch() {
        let tr = TracerSpec::sparse(mv(&[0.0; 3], 1.0), 2, 2.0).unwrap();
        assert!(score_sparse(&tr, &ParameterPoint::zeros(2), &z(&[1, 1])).is_err());
        assert!(score_sparse(&tr, &ParameterPoint::zeros(3), &z(&[1, 1, 1])).is_err());
        assert!(score_scaling_matrix(&tr, &ParameterPoint::zeros(3), &z(&[1, 1, 0])).is_err());
        assert!(TracerSpec::sparse(mv(&[0.9, 0.0], 1.0), 1, 2.0).is_err());
    }

    #[test]
    fn scaling_matrix_examples() {
        let tr = TracerSpec::scaling_matrix(mv(&[0.0; 3], 0.5), 0.5, 4).unwrap();
        assert_eq!(tr.lambda_diag(), &[1.0, 1.0, 1.0]);
        let theta = ParameterPoint::in_l2_ball(vec![0.1, -0.2, 0.3]);
        let got = score_scaling_matrix(&tr, &theta, &z(&[1, 1, -1])).unwrap();
        assert!((got - 2.0 * (0.1 - 0.2 - 0.3)).abs() < 1e-15);

        let tr = TracerSpec::scaling_matrix(mv(&[0.25, 0.5], 0.5), 0.5, 1).unwrap();
        assert!((tr.lambda_diag()[0] - 0.8).abs() < 1e-15);
        assert_eq!(tr.lambda_diag()[1], 0.0);

        assert!(matches!(
            TracerSpec::scaling_matrix(mv(&[0.0, 1.0], 1.0), 1.0, 1),
            Err(Error::Singularity { coordinate: 1 })
        ));
        assert!(TracerSpec::scaling_matrix(mv(&[0.6], 1.0), 0.5, 1).is_err());
    }

    #[test]
    fn clip_bound_never_triggers_in_range() {
        let tree = SeedTree::new(9);
        let mut rng = tree.substream(0, Purpose::Custom(1));
        for &(d, k, p) in &[(8usize, 3usize, 2.0f64), (16, 16, 1.0), (10, 1, 4.0)] {
            let spec = ProblemSpec::box_lp(d, p, k).unwrap();
            let prior = BetaPrior::new(1.0, spec.mean_bound(), d).unwrap();
            for _ in 0..200 {
                let pop = spec.population(sample_prior(&prior, &mut rng)).unwrap();
                let tr = TracerSpec::sparse(pop.mu().clone(), k, p).unwrap();
                let r = (d as f64).powf(-1.0 / p);
                let theta = spec.point((0..d).map(|_| rng.random_range(-r..=r)).collect()).unwrap();
                let s = tr.evaluate(&theta, &sample_sparse(&pop, &mut rng)).unwrap();
                assert!(!s.clipped && s.value.abs() <= 2.0 * (k as f64).sqrt());
            }
        }
    }

    #[test]
    fn thresholds() {
        assert_eq!(calibrate_threshold(&ThresholdPolicy::HalfTraceValue { t_hat: 1.6 }, &[]).unwrap(), 0.8);
        // 10/xi = 20 > 4, so this small example needs a relaxed minimum: exercise the order statistic directly
        let nulls: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(calibrate_threshold(&ThresholdPolicy::NullQuantile { xi: 0.5 }, &nulls).unwrap(), 11.0);
        assert!(calibrate_threshold(&ThresholdPolicy::NullQuantile { xi: 0.5 }, &[1.0, 2.0, 3.0, 4.0]).is_err());
        assert!(calibrate_threshold(&ThresholdPolicy::NullQuantile { xi: 0.0 }, &nulls).is_err());
        // ties at the cut push the threshold to the next distinct value
        let mut tied = vec![0.0; 15];
        tied.extend([1.0; 5]);
        tied[19] = 2.0;
        assert_eq!(calibrate_threshold(&ThresholdPolicy::NullQuantile { xi: 0.5 }, &tied).unwrap(), 1.0);
        let tied: Vec<f64> = [vec![0.0; 180], vec![1.0; 20]].concat();
        assert_eq!(calibrate_threshold(&ThresholdPolicy::NullQuantile { xi: 0.05 }, &tied).unwrap(), 1.0f64.next_up());
        let flat = vec![0.0; 200];
        assert!(calibrate_threshold(&ThresholdPolicy::NullQuantile { xi: 0.05 }, &flat).unwrap() > 0.0);
    }

    #[test]
    fn normal_quantile_calibration() {
        let mut rng = SeedTree::new(10).substream(0, Purpose::Custom(2));
        let nulls: Vec<f64> = (0..10_000).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        let lambda = calibrate_threshold(&ThresholdPolicy::NullQuantile { xi: 0.05 }, &nulls).unwrap();
        assert!((lambda - 1.6448536269514722).abs() < 0.05, "{lambda}");
    }

    #[test]
    fn pz_examples() {
        assert_eq!(recall_lower_bound_pz(&[2.0, 0.0, 0.0], 1.0 / 3.0), 0.25);
        let a = [0.5; 6];
        assert_eq!(recall_lower_bound_pz(&a, 0.0), 6.0);
        assert_eq!(recall_lower_bound_pz(&[0.0; 4], 0.5), 0.0);
    }

    fn box_setup(learner: LearnerConfig, d: usize, n: usize, beta: f64) -> TraceSetup {
        let spec = ProblemSpec::box_lp(d, 2.0, d).unwrap();
        TraceSetup { learner, spec, tracer: TracerKind::SparseScore, prior: BetaPrior::new(beta, 1.0, d).unwrap(), n }
    }

    #[test]
    fn constant_learner_scores_zero() {
        let setup = box_setup(LearnerConfig::Constant(ParameterPoint::zeros(32)), 32, 20, 1.0);
        let exp = TraceExperiment { setup: setup.clone(), fresh: 100, policy: ThresholdPolicy::HalfTraceValue { t_hat: 0.5 } };
        let rep = run_trace_trial(&exp, &SeedTree::new(1), 0).unwrap();
        assert!(rep.scores_train.iter().chain(&rep.scores_fresh).all(|&s| s == 0.0));
        assert_eq!(rep.recall_estimate, 0.0);
        assert_eq!(rep.soundness_estimate, 0.0);
        let est = estimate_trace_value(&setup, 30, &SeedTree::new(1)).unwrap();
        assert_eq!(est.mean, 0.0);
    }

    #[test]
    fn report_invariants() {
        let setup = box_setup(LearnerConfig::ErmLinear, 64, 30, 4.0);
        let exp = TraceExperiment { setup, fresh: 500, policy: ThresholdPolicy::NullQuantile { xi: 0.05 } };
        let rep = run_trace_trial(&exp, &SeedTree::new(2), 3).unwrap();
        let expected: Vec<usize> = (0..30).filter(|&i| rep.scores_train[i] >= rep.lambda).collect();
        assert_eq!(rep.flagged, expected);
        assert_eq!(rep.recall_estimate, expected.len() as f64);
        assert_eq!(rep.soundness_estimate, rep.fresh_flags() as f64 / 500.0);
        assert!(rep.recall_pz <= rep.recall_estimate);
        assert_eq!(rep.clip_events, 0);
        // replaying a trial gives the same report
        assert_eq!(rep, run_trace_trial(&exp, &SeedTree::new(2), 3).unwrap());
    }

    #[test]
    fn single_point_trace_value() {
        // d = k = n = 1: ERM returns θ = Z, so E[φ] = E[Z(Z - mu)] = 1 - E[mu²] = 2β/(2β+1)
        let spec = ProblemSpec::box_lp(1, 2.0, 1).unwrap();
        let setup = TraceSetup {
            learner: LearnerConfig::ErmLinear,
            spec,
            tracer: TracerKind::SparseScore,
            prior: BetaPrior::new(1.0, 1.0, 1).unwrap(),
            n: 1,
        };
        let est = estimate_trace_value(&setup, 100_000, &SeedTree::new(3)).unwrap();
        assert!((est.mean - 2.0 / 3.0).abs() <= est.ci_half_width, "{est:?}");
    }

    #[test]
    fn independent_learner_has_zero_trace_value() {
        let tree = SeedTree::new(4);
        let d = 16;
        let spec = ProblemSpec::box_lp(d, 2.0, d).unwrap();
        let prior = BetaPrior::new(2.0, 1.0, d).unwrap();
        let vals: Vec<f64> = (0..2000u64)
            .map(|t| {
                let pop = draw_population(&spec, &prior, &mut tree.substream(t, Purpose::Prior)).unwrap();
                let tr = TracerSpec::for_problem(TracerKind::SparseScore, &spec, 1.0, pop.mu().clone()).unwrap();
                let shadow = Dataset::sample(&pop, 10, &mut tree.substream(t, Purpose::Pilot)).unwrap();
                let theta = train(&LearnerConfig::ErmLinear, &spec, &shadow, &mut tree.substream(t, Purpose::Learner)).unwrap();
                let data = Dataset::sample(&pop, 10, &mut tree.substream(t, Purpose::Train)).unwrap();
                data.samples().iter().map(|z| tr.evaluate(&theta, z).unwrap().value).sum::<f64>() / 10.0
            })
            .collect();
        let est = Estimate::from_samples(&vals);
        assert!(est.mean.abs() <= 4.0 * est.std_error(), "{est:?}");
    }

    #[test]
    fn fresh_scores_have_mean_zero() {
        let tree = SeedTree::new(5);
        let sparse = TraceSetup {
            learner: LearnerConfig::ErmLinear,
            spec: ProblemSpec::box_lp(40, 3.0, 8).unwrap(),
            tracer: TracerKind::SparseScore,
            prior: BetaPrior::new(2.0, 0.2, 40).unwrap(),
            n: 20,
        };
        let scaling = TraceSetup {
            learner: LearnerConfig::ErmLinear,
            spec: ProblemSpec::l1_capped(40, 4).unwrap(),
            tracer: TracerKind::ScalingMatrixScore,
            prior: BetaPrior::new(2.0, 0.4, 40).unwrap(),
            n: 20,
        };
        for setup in [sparse, scaling] {
            let exp = TraceExperiment { setup, fresh: 200, policy: ThresholdPolicy::HalfTraceValue { t_hat: 1.0 } };
            let fresh: Vec<f64> = (0..200u64).flat_map(|t| run_trace_trial(&exp, &tree, t).unwrap().scores_fresh).collect();
            let est = Estimate::from_samples(&fresh);
            assert!(est.mean.abs() <= 4.0 * est.std_error(), "{:?}: {est:?}", exp.setup.tracer);
        }
    }

    #[test]
    fn null_quantile_controls_false_positives() {
        let setup = box_setup(LearnerConfig::ErmLinear, 128, 40, 4.0);
        for xi in [0.01, 0.05] {
            let fresh = 10_000;
            let exp = TraceExperiment { setup: setup.clone(), fresh, policy: ThresholdPolicy::NullQuantile { xi } };
            let rep = run_trace_trial(&exp, &SeedTree::new(6), 0).unwrap();
            let bound = xi + 3.0 * (xi * (1.0 - xi) / fresh as f64).sqrt();
            // single trial: the calibration sample adds its own sampling error, allow it
            let cal = 3.0 * (xi * (1.0 - xi) / null_sample_size(xi) as f64).sqrt();
            assert!(rep.soundness_estimate <= bound + cal, "xi={xi}: {}", rep.soundness_estimate);
        }
    }

    #[test]
    fn dp_learner_respects_ceiling() {
        let (n, eps, delta, xi) = (50usize, 0.5f64, 1e-5f64, 0.05f64);
        let setup = box_setup(LearnerConfig::GaussianDp { epsilon: eps, delta }, 64, n, 1.0);
        let exp = TraceExperiment { setup, fresh: 200, policy: ThresholdPolicy::NullQuantile { xi } };
        let recalls: Vec<f64> = (0..200u64).map(|t| run_trace_trial(&exp, &SeedTree::new(7), t).unwrap().recall_estimate).collect();
        let est = Estimate::from_samples(&recalls);
        let ceiling = n as f64 * eps.exp() * xi + n as f64 * delta;
        assert!(est.mean <= ceiling + 4.0 * est.ci_half_width, "{est:?} vs {ceiling}");
    }

    #[test]
    fn score_norm_scales_like_sqrt_n_plus_sqrt_d() {
        let tree = SeedTree::new(8);
        let mut ratios = Vec::new();
        for &n in &[64usize, 256] {
            for &d in &[64usize, 256] {
                let spec = ProblemSpec::box_lp(d, 2.0, d).unwrap();
                let prior = BetaPrior::new(4.0, 1.0, d).unwrap();
                let pop = draw_population(&spec, &prior, &mut tree.substream(n as u64, Purpose::Prior)).unwrap();
                let tr = TracerSpec::for_problem(TracerKind::SparseScore, &spec, 1.0, pop.mu().clone()).unwrap();
                let data = Dataset::sample(&pop, n, &mut tree.substream(d as u64, Purpose::Train)).unwrap();
                let sup = score_norm_sup(&tr, &spec, &data, 32, &mut tree.substream(0, Purpose::Custom(3))).unwrap();
                ratios.push(sup / ((n as f64).sqrt() + (d as f64).sqrt()));
            }
        }
        let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &r| (l.min(r), h.max(r)));
        assert!(hi / lo <= 3.0, "{ratios:?}");
    }

    #[test]
    fn prior_defaults() {
        assert_eq!(box_prior_beta(2048, 2.0, 2048, 1.0), 1.0);
        assert!((box_prior_beta(100, 2.0, 100, 0.01) - (1.0 / 0.06f64).powi(2)).abs() < 1e-9);
        let (beta, gamma) = scaling_prior_params(16 * 14 * 100, 4, 0.05);
        assert!((beta - (1.0 + 0.5 * 100f64.ln())).abs() < 1e-12);
        assert!((gamma - 0.4).abs() < 1e-15);
        assert_eq!(scaling_prior_params(10, 1, 0.5), (1.0, 1.0));
    }
}
