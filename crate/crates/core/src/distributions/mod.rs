//! Data and prior distributions.
//!
//! * [`SparsePopulation`]: ternary vectors with a uniformly random size-`k`
//!   support whose nonzero entries are independent signs with mean `(d/k)·mu[j]`.
//!   With `k = d` this is the product distribution on `{±1}^d` with mean `mu`.
//! * [`BetaPrior`]: i.i.d. symmetric beta coordinates rescaled to `[-gamma, gamma]`.
//! * [`QuadratureRule`]: Gauss–Jacobi rules integrating polynomials exactly
//!   against one coordinate of a [`BetaPrior`].

mod beta;
mod quadrature;
mod sparse;

pub use beta::{sample_prior, BetaPrior};
pub use quadrature::{prior_quadrature, QuadratureRule};
pub use sparse::{binomial, pmf, sample_sparse, sample_support, MeanVector, SparsePopulation, TernarySample};
