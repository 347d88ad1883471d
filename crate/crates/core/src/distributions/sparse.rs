use rand::Rng;

use crate::error::{invalid, Error, Result};

/// Slack allowed when checking `|mu[j]| <= bound`.
const BOUND_TOL: f64 = 1e-12;

/// A coordinate-mean vector together with the box it must lie in.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanVector {
    values: Vec<f64>,
    box_bound: f64,
}

impl MeanVector {
    pub fn new(values: Vec<f64>, box_bound: f64) -> Result<Self> {
        if values.is_empty() {
            return invalid("mean vector must have dimension >= 1");
        }
        if !(box_bound.is_finite() && box_bound > 0.0) {
            return invalid(format!("box bound must be positive and finite, got {box_bound}"));
        }
        if let Some((j, v)) = values.iter().enumerate().find(|(_, v)| v.is_nan() || v.abs() > box_bound + BOUND_TOL) {
            return invalid(format!("mu[{j}] = {v} lies outside [-{box_bound}, {box_bound}]"));
        }
        Ok(Self { values, box_bound })
    }

    /// Builds a mean vector by clamping every entry into `[-box_bound, box_bound]`.
    pub fn clamped(values: Vec<f64>, box_bound: f64) -> Result<Self> {
        let values = values.into_iter().map(|v| v.clamp(-box_bound, box_bound)).collect();
        Self::new(values, box_bound)
    }

    pub fn zeros(d: usize, box_bound: f64) -> Result<Self> {
        Self::new(vec![0.0; d], box_bound)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn box_bound(&self) -> f64 {
        self.box_bound
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// A vector in `{-1, 0, +1}^d` with its sorted support.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TernarySample {
    entries: Vec<i8>,
    support: Vec<usize>,
}

impl TernarySample {
    pub fn from_entries(entries: Vec<i8>) -> Result<Self> {
        if let Some(j) = entries.iter().position(|e| !matches!(e, -1..=1)) {
            return invalid(format!("entry {j} = {} is not in {{-1, 0, 1}}", entries[j]));
        }
        let support = entries.iter().enumerate().filter(|(_, &e)| e != 0).map(|(j, _)| j).collect();
        Ok(Self { entries, support })
    }

    /// Dense `±1` vector (every coordinate nonzero).
    pub fn from_signs(signs: &[bool]) -> Self {
        Self {
            entries: signs.iter().map(|&s| if s { 1 } else { -1 }).collect(),
            support: (0..signs.len()).collect(),
        }
    }

    pub fn entries(&self) -> &[i8] {
        &self.entries
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    /// Number of nonzero coordinates.
    pub fn l0(&self) -> usize {
        self.support.len()
    }

    pub fn get(&self, j: usize) -> f64 {
        f64::from(self.entries[j])
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        self.support.iter().map(|&j| v[j] * f64::from(self.entries[j])).sum()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.entries.iter().map(|&e| f64::from(e)).collect()
    }
}

/// The sparse distribution family over `k`-sparse ternary vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePopulation {
    mu: MeanVector,
    k: usize,
    /// P(Z^j = +1 | j in support).
    plus_prob: Vec<f64>,
}

impl SparsePopulation {
    pub fn new(mu: MeanVector, k: usize) -> Result<Self> {
        let d = mu.len();
        if k == 0 || k > d {
            return invalid(format!("sparsity k = {k} must lie in [1, {d}]"));
        }
        let bound = k as f64 / d as f64;
        if let Some((j, v)) = mu.values().iter().enumerate().find(|(_, v)| v.abs() > bound + BOUND_TOL) {
            return invalid(format!("|mu[{j}]| = {} exceeds k/d = {bound}", v.abs()));
        }
        let scale = d as f64 / k as f64;
        let plus_prob = mu.values().iter().map(|m| ((1.0 + scale * m) / 2.0).clamp(0.0, 1.0)).collect();
        Ok(Self { mu, k, plus_prob })
    }

    /// Product distribution on `{±1}^d` with mean `mu` (the `k = d` member).
    pub fn dense(mu: MeanVector) -> Result<Self> {
        let d = mu.len();
        Self::new(mu, d)
    }

    pub fn d(&self) -> usize {
        self.mu.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mu(&self) -> &MeanVector {
        &self.mu
    }

    pub fn plus_probability(&self, j: usize) -> f64 {
        self.plus_prob[j]
    }

    /// `d/k`, the factor relating coordinate means to conditional sign means.
    pub fn inflation(&self) -> f64 {
        self.d() as f64 / self.k as f64
    }
}

/// Uniformly random size-`k` subset of `{0, .., d-1}`, returned sorted.
pub fn sample_support<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    if k == 0 || k > d {
        return invalid(format!("support size k = {k} must lie in [1, {d}]"));
    }
    if k == d {
        return Ok((0..d).collect());
    }
    let mut idx: Vec<usize> = (0..d).collect();
    for i in 0..k {
        let j = rng.random_range(i..d);
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx.sort_unstable();
    Ok(idx)
}

/// Draws one sample from `pop`.
pub fn sample_sparse<R: Rng + ?Sized>(pop: &SparsePopulation, rng: &mut R) -> TernarySample {
    let support = sample_support(pop.d(), pop.k, rng).expect("population invariants guarantee a valid k");
    let mut entries = vec![0i8; pop.d()];
    for &j in &support {
        entries[j] = if rng.random::<f64>() < pop.plus_prob[j] { 1 } else { -1 };
    }
    TernarySample { entries, support }
}

/// `binom(d, k)` as a float (exact while it fits in 53 bits).
pub fn binomial(d: usize, k: usize) -> f64 {
    if k > d {
        return 0.0;
    }
    let k = k.min(d - k);
    (1..=k).fold(1.0, |c, i| c * (d - k + i) as f64 / i as f64)
}

/// Exact probability of `z` under `pop`.
pub fn pmf(pop: &SparsePopulation, z: &TernarySample) -> Result<f64> {
    if z.dim() != pop.d() {
        return Err(Error::InvalidArgument(format!("sample has dimension {}, population has {}", z.dim(), pop.d())));
    }
    if z.l0() != pop.k {
        return Ok(0.0);
    }
    let scale = pop.inflation();
    let mu = pop.mu.values();
    let weight: f64 = z.support().iter().map(|&j| (1.0 + scale * mu[j] * z.get(j)) / 2.0).product();
    Ok(weight / binomial(pop.d(), pop.k))
}
