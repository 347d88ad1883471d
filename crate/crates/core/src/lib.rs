//! Fingerprinting-based tracing attacks on learners for linear stochastic
//! convex optimization over `ℓp` geometries.
//!
//! The crate provides
//!
//! * [`distributions`]: sparse ternary data, the rescaled beta prior and exact prior quadrature;
//! * [`problems`]: the linear-loss problems, their closed-form argmax and excess risk;
//! * [`learners`]: ERM, the Gaussian-mechanism learner and baselines;
//! * [`tracers`]: score functions, threshold calibration and tracing trials;
//! * [`oracles`]: exact enumeration checks of the fingerprinting identities;
//! * [`harness`]: experiment configs, deterministic parallel runs and CSV output.

pub mod distributions;
pub mod error;
pub mod harness;
pub mod learners;
pub mod oracles;
pub mod problems;
pub mod rng;
pub mod stats;
pub mod tracers;

pub use error::{Error, Result};
