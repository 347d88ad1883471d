use nalgebra::{DMatrix, SymmetricEigen};

use super::BetaPrior;
use crate::error::{invalid, Result};

/// Nodes and probability weights for integrating against one prior coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Gauss–Jacobi rule with `ceil((max_degree + 1) / 2)` nodes, exact for
/// polynomials of degree `<= max_degree` against the prior's coordinate law.
///
/// Built by Golub–Welsch from the monic three-term recurrence of the Jacobi
/// polynomials with equal parameters `a = beta - 1`:
/// `b_1 = 1/(2a + 3)`, `b_j = j(j + 2a) / ((2j + 2a + 1)(2j + 2a - 1))`.
pub fn prior_quadrature(prior: &BetaPrior, max_degree: usize) -> Result<QuadratureRule> {
    let m = max_degree / 2 + 1;
    let a = prior.beta() - 1.0;
    if a <= -1.0 {
        return invalid("beta must be positive");
    }
    let mut jacobi = DMatrix::<f64>::zeros(m, m);
    for j in 1..m {
        let jf = j as f64;
        let b = if j == 1 {
            1.0 / (2.0 * a + 3.0)
        } else {
            jf * (jf + 2.0 * a) / ((2.0 * jf + 2.0 * a + 1.0) * (2.0 * jf + 2.0 * a - 1.0))
        };
        let off = b.sqrt();
        jacobi[(j, j - 1)] = off;
        jacobi[(j - 1, j)] = off;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    // The law is symmetric: average mirrored pairs so odd moments vanish to rounding.
    let sym: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let (x, w) = pairs[i];
            let (xm, wm) = pairs[m - 1 - i];
            ((x - xm) / 2.0, (w + wm) / 2.0)
        })
        .collect();
    let total: f64 = sym.iter().map(|p| p.1).sum();
    let gamma = prior.gamma();
    Ok(QuadratureRule {
        nodes: sym.iter().map(|p| gamma * p.0).collect(),
        weights: sym.iter().map(|p| p.1 / total).collect(),
    })
}
