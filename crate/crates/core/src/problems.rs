//! Hard stochastic convex optimization instances with linear losses.
//!
//! | variant            | parameter set                          | data space                | loss              |
//! |--------------------|----------------------------------------|---------------------------|-------------------|
//! | `BoxLp`            | `ℓ∞` ball of radius `d^(-1/p)`          | `k`-sparse ternary        | `-k^(-1/q) <θ,z>` |
//! | `L1Capped`         | `{‖θ‖₁ ≤ 1} ∩ {‖θ‖∞ ≤ 1/s}`            | `{±1}^d`                  | `-<θ,z>`          |
//! | `L1Counterexample` | `{‖θ‖₁ ≤ 1}`                           | `{±1}^d`                  | `-<θ,z>`          |
//!
//! Losses are linear in `θ`, so population risks, optimal risks and their
//! maximizers have closed forms in terms of the data mean.

use rand::Rng;

use crate::distributions::{sample_sparse, MeanVector, SparsePopulation, TernarySample};
use crate::error::{invalid, Error, Result};

/// Tolerance on norm constraints when deciding feasibility.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    BoxLp { p: f64, k: usize },
    L1Capped { s: usize },
    L1Counterexample,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemSpec {
    geometry: Geometry,
    d: usize,
}

impl ProblemSpec {
    pub fn box_lp(d: usize, p: f64, k: usize) -> Result<Self> {
        if d == 0 {
            return invalid("dimension must be >= 1");
        }
        if !(p.is_finite() && p >= 1.0) {
            return invalid(format!("p must lie in [1, inf), got {p}"));
        }
        if k == 0 || k > d {
            return invalid(format!("sparsity k = {k} must lie in [1, {d}]"));
        }
        Ok(Self { geometry: Geometry::BoxLp { p, k }, d })
    }

    pub fn l1_capped(d: usize, s: usize) -> Result<Self> {
        if d == 0 {
            return invalid("dimension must be >= 1");
        }
        if s == 0 || s > d {
            return invalid(format!("cap s = {s} must lie in [1, {d}]"));
        }
        Ok(Self { geometry: Geometry::L1Capped { s }, d })
    }

    pub fn l1_counterexample(d: usize) -> Result<Self> {
        if d == 0 {
            return invalid("dimension must be >= 1");
        }
        Ok(Self { geometry: Geometry::L1Counterexample, d })
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Hölder conjugate of the Lipschitz norm; `inf` for `p = 1`.
    pub fn holder_conjugate(&self) -> f64 {
        match self.geometry {
            Geometry::BoxLp { p, .. } if p > 1.0 => p / (p - 1.0),
            _ => f64::INFINITY,
        }
    }

    /// The `p` of the `ℓp` norm in which the loss is 1-Lipschitz.
    pub fn lipschitz_p(&self) -> f64 {
        match self.geometry {
            Geometry::BoxLp { p, .. } => p,
            _ => 1.0,
        }
    }

    /// `k^(-1/q)` for `BoxLp` (1 when `p = 1`), 1 otherwise.
    pub fn loss_scale(&self) -> f64 {
        match self.geometry {
            Geometry::BoxLp { p, k } => (k as f64).powf(1.0 / p - 1.0),
            _ => 1.0,
        }
    }

    /// Number of nonzeros in every data point.
    pub fn data_sparsity(&self) -> usize {
        match self.geometry {
            Geometry::BoxLp { k, .. } => k,
            _ => self.d,
        }
    }

    /// Box bound on admissible data means (`k/d` for sparse data).
    pub fn mean_bound(&self) -> f64 {
        self.data_sparsity() as f64 / self.d as f64
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        if theta.len() != self.d || theta.iter().any(|t| !t.is_finite()) {
            return false;
        }
        let linf = theta.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        let l1: f64 = theta.iter().map(|t| t.abs()).sum();
        match self.geometry {
            Geometry::BoxLp { p, .. } => linf <= (self.d as f64).powf(-1.0 / p) + FEASIBILITY_TOL,
            Geometry::L1Capped { s } => l1 <= 1.0 + FEASIBILITY_TOL && linf <= 1.0 / s as f64 + FEASIBILITY_TOL,
            Geometry::L1Counterexample => l1 <= 1.0 + FEASIBILITY_TOL,
        }
    }

    pub fn in_data_space(&self, z: &TernarySample) -> bool {
        z.dim() == self.d && z.l0() == self.data_sparsity()
    }

    /// Wraps `theta` as a parameter point, recording membership in this spec's parameter set.
    pub fn point(&self, theta: Vec<f64>) -> Result<ParameterPoint> {
        if theta.len() != self.d {
            return invalid(format!("parameter has dimension {}, problem has {}", theta.len(), self.d));
        }
        let feasible = self.contains(&theta);
        Ok(ParameterPoint { theta, feasible })
    }

    /// The data distribution with mean `mu` over this spec's data space.
    pub fn population(&self, mu: MeanVector) -> Result<SparsePopulation> {
        if mu.len() != self.d {
            return invalid(format!("mean has dimension {}, problem has {}", mu.len(), self.d));
        }
        SparsePopulation::new(mu, self.data_sparsity())
    }
}

/// A learner output together with its feasibility flag.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterPoint {
    theta: Vec<f64>,
    feasible: bool,
}

impl ParameterPoint {
    pub fn zeros(d: usize) -> Self {
        Self { theta: vec![0.0; d], feasible: true }
    }

    /// A point whose feasibility is judged against the unit `ℓ2` ball.
    pub fn in_l2_ball(theta: Vec<f64>) -> Self {
        let norm = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
        Self { feasible: norm <= 1.0 + FEASIBILITY_TOL, theta }
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn feasible(&self) -> bool {
        self.feasible
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        self.theta.iter().zip(v).map(|(a, b)| a * b).sum()
    }
}

fn require_feasible(theta: &ParameterPoint, d: usize) -> Result<()> {
    if !theta.feasible {
        return Err(Error::ContractViolation("parameter point is not feasible".into()));
    }
    if theta.dim() != d {
        return invalid(format!("parameter has dimension {}, problem has {d}", theta.dim()));
    }
    Ok(())
}

pub fn loss(spec: &ProblemSpec, theta: &ParameterPoint, z: &TernarySample) -> Result<f64> {
    require_feasible(theta, spec.d)?;
    if !spec.in_data_space(z) {
        return Err(Error::ContractViolation(format!(
            "sample with {} nonzeros is outside the data space (needs {})",
            z.l0(),
            spec.data_sparsity()
        )));
    }
    Ok(-spec.loss_scale() * z.dot(theta.theta()))
}

fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Indices of the `s` largest `|v[j]|`, ties broken by lowest index.
fn top_magnitudes(v: &[f64], s: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
    idx.truncate(s);
    idx
}

/// Closed-form maximizer of `<θ, v>` over the parameter set.
pub fn support_argmax(spec: &ProblemSpec, v: &[f64]) -> Result<ParameterPoint> {
    if v.len() != spec.d {
        return invalid(format!("direction has dimension {}, problem has {}", v.len(), spec.d));
    }
    let theta = match spec.geometry {
        Geometry::BoxLp { p, .. } => {
            let r = (spec.d as f64).powf(-1.0 / p);
            v.iter().map(|&x| r * sign(x)).collect()
        }
        Geometry::L1Counterexample => {
            let j = top_magnitudes(v, 1)[0];
            let mut theta = vec![0.0; spec.d];
            theta[j] = sign(v[j]);
            theta
        }
        Geometry::L1Capped { s } => {
            let mut theta = vec![0.0; spec.d];
            for j in top_magnitudes(v, s) {
                theta[j] = sign(v[j]) / s as f64;
            }
            theta
        }
    };
    Ok(ParameterPoint { theta, feasible: true })
}

/// `sup_{θ ∈ Θ} <θ, v>` in closed form.
pub fn support_value(spec: &ProblemSpec, v: &[f64]) -> f64 {
    match spec.geometry {
        Geometry::BoxLp { p, .. } => (spec.d as f64).powf(-1.0 / p) * v.iter().map(|x| x.abs()).sum::<f64>(),
        Geometry::L1Counterexample => v.iter().fold(0.0f64, |m, x| m.max(x.abs())),
        Geometry::L1Capped { s } => top_magnitudes(v, s).iter().map(|&j| v[j].abs()).sum::<f64>() / s as f64,
    }
}

/// Population excess risk `F(θ) - inf F` for data with mean `mu`.
pub fn excess_risk(spec: &ProblemSpec, theta: &ParameterPoint, mu: &MeanVector) -> Result<f64> {
    require_feasible(theta, spec.d)?;
    if mu.len() != spec.d {
        return invalid(format!("mean has dimension {}, problem has {}", mu.len(), spec.d));
    }
    let gap = support_value(spec, mu.values()) - theta.dot(mu.values());
    Ok((spec.loss_scale() * gap).max(0.0))
}

/// Excess risk of the linear loss `-<θ,z>` over the unit `ℓ2` ball: `‖mu‖₂ - <θ, mu>`.
pub fn l2_ball_excess_risk(theta: &ParameterPoint, mu: &MeanVector) -> Result<f64> {
    if !theta.feasible {
        return Err(Error::ContractViolation("parameter point is not feasible".into()));
    }
    let norm = mu.values().iter().map(|m| m * m).sum::<f64>().sqrt();
    Ok((norm - theta.dot(mu.values())).max(0.0))
}

fn random_feasible<R: Rng + ?Sized>(spec: &ProblemSpec, rng: &mut R) -> Vec<f64> {
    let d = spec.d;
    let vertex = rng.random_bool(0.25);
    match spec.geometry {
        Geometry::BoxLp { p, .. } => {
            let r = (d as f64).powf(-1.0 / p);
            (0..d)
                .map(|_| if vertex { r * sign(rng.random::<f64>() - 0.5) } else { rng.random_range(-r..=r) })
                .collect()
        }
        Geometry::L1Counterexample => {
            let u: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let l1: f64 = u.iter().map(|x| x.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
            let radius = if vertex { 1.0 } else { rng.random::<f64>() };
            u.iter().map(|x| x * radius / l1).collect()
        }
        Geometry::L1Capped { s } => {
            let cap = 1.0 / s as f64;
            if vertex {
                let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
                return support_argmax(spec, &v).expect("dimension matches").theta;
            }
            let u: Vec<f64> = (0..d).map(|_| rng.random_range(-cap..=cap)).collect();
            let l1: f64 = u.iter().map(|x| x.abs()).sum();
            let shrink = if l1 > 1.0 { 1.0 / l1 } else { 1.0 };
            u.iter().map(|x| x * shrink).collect()
        }
    }
}

/// Checks `|f(θ₁,z) - f(θ₂,z)| <= ‖θ₁ - θ₂‖_p + 1e-9` on random feasible pairs and data points.
pub fn validate_lipschitz<R: Rng + ?Sized>(spec: &ProblemSpec, trials: usize, rng: &mut R) -> bool {
    let p = spec.lipschitz_p();
    let null = MeanVector::zeros(spec.d, 1.0).expect("d >= 1");
    let pop = spec.population(null).expect("zero mean is always admissible");
    (0..trials.max(1)).all(|_| {
        let a = random_feasible(spec, rng);
        let b = if rng.random_bool(0.05) { a.clone() } else { random_feasible(spec, rng) };
        let z = sample_sparse(&pop, rng);
        let (Ok(pa), Ok(pb)) = (spec.point(a), spec.point(b)) else { return false };
        let (Ok(fa), Ok(fb)) = (loss(spec, &pa, &z), loss(spec, &pb, &z)) else { return false };
        let dist = pa.theta().iter().zip(pb.theta()).map(|(x, y)| (x - y).abs().powf(p)).sum::<f64>().powf(1.0 / p);
        (fa - fb).abs() <= dist + 1e-9
    })
}
