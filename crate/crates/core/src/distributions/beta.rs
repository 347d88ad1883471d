use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::MeanVector;
use crate::error::{invalid, Result};

/// Product of `d` symmetric beta laws on `[-gamma, gamma]`, each with density
/// proportional to `(1 - (x/gamma)^2)^(beta - 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaPrior {
    beta: f64,
    gamma: f64,
    d: usize,
}

impl BetaPrior {
    pub fn new(beta: f64, gamma: f64, d: usize) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return invalid(format!("beta must be positive and finite, got {beta}"));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return invalid(format!("gamma must lie in (0, 1], got {gamma}"));
        }
        if d == 0 {
            return invalid("prior dimension must be >= 1");
        }
        Ok(Self { beta, gamma, d })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `E[X^r]` for one coordinate. Odd moments vanish; for `r = 2m`,
    /// `X^2 / gamma^2 ~ Beta(1/2, beta)` gives `gamma^(2m) · prod_{i<m} (2i+1)/(2i+2beta+1)`.
    pub fn moment(&self, r: u32) -> f64 {
        if r % 2 == 1 {
            return 0.0;
        }
        let m = r / 2;
        (0..m).fold(self.gamma.powi(r as i32), |acc, i| {
            let i = f64::from(i);
            acc * (2.0 * i + 1.0) / (2.0 * i + 2.0 * self.beta + 1.0)
        })
    }

    pub fn second_moment(&self) -> f64 {
        self.moment(2)
    }

    /// One coordinate draw: `gamma · (G1 - G2) / (G1 + G2)` with `G1, G2 ~ Gamma(beta, 1)`.
    pub fn sample_coordinate<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        draw_coordinate(&self.gamma_law(), self.gamma, rng)
    }

    fn gamma_law(&self) -> Gamma<f64> {
        Gamma::new(self.beta, 1.0).expect("beta validated at construction")
    }
}

fn draw_coordinate<R: Rng + ?Sized>(g: &Gamma<f64>, gamma: f64, rng: &mut R) -> f64 {
    loop {
        let (a, b): (f64, f64) = (g.sample(rng), g.sample(rng));
        let s = a + b;
        // both draws can underflow to zero for tiny beta
        if s > 0.0 {
            return gamma * ((a - b) / s).clamp(-1.0, 1.0);
        }
    }
}

/// Draws a mean vector with i.i.d. coordinates from `prior`.
pub fn sample_prior<R: Rng + ?Sized>(prior: &BetaPrior, rng: &mut R) -> MeanVector {
    let g = prior.gamma_law();
    let values = (0..prior.d).map(|_| draw_coordinate(&g, prior.gamma, rng)).collect();
    MeanVector::new(values, prior.gamma).expect("samples lie in [-gamma, gamma]")
}
