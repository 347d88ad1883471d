//! Experiment configuration and its flat `key = value` text format.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! # comment
//! key = value
//! ```
//!
//! Blank lines and lines starting with `#` are ignored, keys are snake_case
//! and unknown keys are rejected. Lists (`sweep_epsilons`) are comma
//! separated. Optional keys (`k`, `beta`, `alpha_target`, `gamma`) are
//! omitted when unset.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use super::HarnessError;
use crate::tracers::TracerKind;

macro_rules! keyword_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s.trim() {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!(
                        "unknown value {other:?}, expected one of: {}",
                        [$($text),+].join(", ")
                    )),
                }
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

keyword_enum!(ExperimentKind {
    Verify => "verify",
    Trace => "trace",
    DpAudit => "dp_audit",
    Sweep => "sweep",
    TraceValue => "trace_value",
});

keyword_enum!(Variant {
    BoxLp => "box_lp",
    L1Capped => "l1_capped",
    L1Counterexample => "l1_counterexample",
});

keyword_enum!(LearnerKind {
    Erm => "erm",
    GaussianDp => "gaussian_dp",
    Subsample => "subsample",
    NormalizedMean => "normalized_mean",
    Constant => "constant",
});

keyword_enum!(TracerChoice {
    Sparse => "sparse",
    Scaling => "scaling",
});

keyword_enum!(PolicyKind {
    NullQuantile => "null_quantile",
    HalfTraceValue => "half_trace_value",
});

impl From<TracerChoice> for TracerKind {
    fn from(t: TracerChoice) -> Self {
        match t {
            TracerChoice::Sparse => TracerKind::SparseScore,
            TracerChoice::Scaling => TracerKind::ScalingMatrixScore,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub variant: Variant,
    pub d: usize,
    pub p: f64,
    /// Data sparsity for `box_lp`; defaults to `d`.
    pub k: Option<usize>,
    /// Cap for `l1_capped`.
    pub s: usize,
    pub learner: LearnerKind,
    pub epsilon: f64,
    pub delta: f64,
    pub subsample_m: usize,
    pub tracer: TracerChoice,
    pub xi: f64,
    pub policy: PolicyKind,
    pub beta: Option<f64>,
    pub alpha_target: Option<f64>,
    pub gamma: Option<f64>,
    pub n: usize,
    /// Fresh evaluation points per trial.
    pub m: usize,
    pub trials: usize,
    /// Trials used to pick defaults (target accuracy, trace value).
    pub pilot_trials: usize,
    pub seed: u64,
    pub output: PathBuf,
    pub sweep_epsilons: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::Trace,
            variant: Variant::BoxLp,
            d: 1024,
            p: 2.0,
            k: None,
            s: 1,
            learner: LearnerKind::Erm,
            epsilon: 1.0,
            delta: 1e-5,
            subsample_m: 1,
            tracer: TracerChoice::Sparse,
            xi: 0.05,
            policy: PolicyKind::NullQuantile,
            beta: None,
            alpha_target: None,
            gamma: None,
            n: 64,
            m: 1000,
            trials: 100,
            pilot_trials: 200,
            seed: 0,
            output: PathBuf::from("sco-trace.csv"),
            sweep_epsilons: vec![0.25, 0.5, 1.0, 2.0, 4.0],
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, HarnessError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e| HarnessError::Usage(format!("{key}: {e}")))
}

fn usage<T>(msg: impl Into<String>) -> Result<T, HarnessError> {
    Err(HarnessError::Usage(msg.into()))
}

impl ExperimentConfig {
    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        match key {
            "experiment" => self.experiment = parse_value(key, value)?,
            "variant" => self.variant = parse_value(key, value)?,
            "d" => self.d = parse_value(key, value)?,
            "p" => self.p = parse_value(key, value)?,
            "k" => self.k = Some(parse_value(key, value)?),
            "s" => self.s = parse_value(key, value)?,
            "learner" => self.learner = parse_value(key, value)?,
            "epsilon" => self.epsilon = parse_value(key, value)?,
            "delta" => self.delta = parse_value(key, value)?,
            "subsample_m" => self.subsample_m = parse_value(key, value)?,
            "tracer" => self.tracer = parse_value(key, value)?,
            "xi" => self.xi = parse_value(key, value)?,
            "policy" => self.policy = parse_value(key, value)?,
            "beta" => self.beta = Some(parse_value(key, value)?),
            "alpha_target" => self.alpha_target = Some(parse_value(key, value)?),
            "gamma" => self.gamma = Some(parse_value(key, value)?),
            "n" => self.n = parse_value(key, value)?,
            "m" => self.m = parse_value(key, value)?,
            "trials" => self.trials = parse_value(key, value)?,
            "pilot_trials" => self.pilot_trials = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "output" => self.output = PathBuf::from(value.trim()),
            "sweep_epsilons" => {
                self.sweep_epsilons = value
                    .split(',')
                    .filter(|v| !v.trim().is_empty())
                    .map(|v| parse_value(key, v))
                    .collect::<Result<_, _>>()?
            }
            other => return usage(format!("unknown config key {other:?}")),
        }
        Ok(())
    }

    /// Parses the `key = value` format on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut cfg = Self::default();
        cfg.apply(text)?;
        Ok(cfg)
    }

    /// Applies the `key = value` lines in `text` to this config.
    pub fn apply(&mut self, text: &str) -> Result<(), HarnessError> {
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return usage(format!("line {}: expected `key = value`", no + 1));
            };
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    /// Every set field as `(key, value)` text, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![
            ("experiment", self.experiment.to_string()),
            ("variant", self.variant.to_string()),
            ("d", self.d.to_string()),
            ("p", self.p.to_string()),
        ];
        if let Some(k) = self.k {
            out.push(("k", k.to_string()));
        }
        out.extend([
            ("s", self.s.to_string()),
            ("learner", self.learner.to_string()),
            ("epsilon", self.epsilon.to_string()),
            ("delta", self.delta.to_string()),
            ("subsample_m", self.subsample_m.to_string()),
            ("tracer", self.tracer.to_string()),
            ("xi", self.xi.to_string()),
            ("policy", self.policy.to_string()),
        ]);
        for (key, v) in [("beta", self.beta), ("alpha_target", self.alpha_target), ("gamma", self.gamma)] {
            if let Some(v) = v {
                out.push((key, v.to_string()));
            }
        }
        out.extend([
            ("n", self.n.to_string()),
            ("m", self.m.to_string()),
            ("trials", self.trials.to_string()),
            ("pilot_trials", self.pilot_trials.to_string()),
            ("seed", self.seed.to_string()),
            ("output", self.output.display().to_string()),
            ("sweep_epsilons", self.sweep_epsilons.iter().map(f64::to_string).collect::<Vec<_>>().join(",")),
        ]);
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            writeln!(s, "{k} = {v}").expect("writing to a String");
        }
        s
    }

    /// Data sparsity: `k` for the box problem, `d` otherwise.
    pub fn data_sparsity(&self) -> usize {
        match self.variant {
            Variant::BoxLp => self.k.unwrap_or(self.d),
            _ => self.d,
        }
    }

    /// Range checks, reported with the offending field name.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let in_open = |x: f64, lo: f64, hi: f64| x > lo && x < hi;
        if self.d == 0 {
            return usage("d: must be >= 1");
        }
        if !(self.p.is_finite() && self.p >= 1.0) {
            return usage(format!("p: must lie in [1, inf), got {}", self.p));
        }
        if let Some(k) = self.k {
            if k == 0 || k > self.d {
                return usage(format!("k: must lie in [1, d = {}], got {k}", self.d));
            }
            if self.variant != Variant::BoxLp && k != self.d {
                return usage("k: only the box_lp variant has sparse data");
            }
        }
        if self.s == 0 || self.s > self.d {
            return usage(format!("s: must lie in [1, d = {}], got {}", self.d, self.s));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 10.0) {
            return usage(format!("epsilon: must lie in (0, 10], got {}", self.epsilon));
        }
        if !in_open(self.delta, 0.0, 1.0) {
            return usage(format!("delta: must lie in (0, 1), got {}", self.delta));
        }
        if self.subsample_m == 0 || self.subsample_m > self.n {
            return usage(format!("subsample_m: must lie in [1, n = {}], got {}", self.n, self.subsample_m));
        }
        if !in_open(self.xi, 0.0, 1.0) {
            return usage(format!("xi: must lie in (0, 1), got {}", self.xi));
        }
        if self.beta.is_some() && self.alpha_target.is_some() {
            return usage("beta: conflicts with alpha_target (set one)");
        }
        if let Some(b) = self.beta {
            if !(b.is_finite() && b > 0.0) {
                return usage(format!("beta: must be positive, got {b}"));
            }
        }
        if let Some(a) = self.alpha_target {
            if !(a.is_finite() && a > 0.0) {
                return usage(format!("alpha_target: must be positive, got {a}"));
            }
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g <= 1.0) {
                return usage(format!("gamma: must lie in (0, 1], got {g}"));
            }
            if self.tracer == TracerChoice::Sparse {
                return usage("gamma: the sparse tracer fixes gamma = k/d");
            }
        }
        if self.tracer == TracerChoice::Sparse && self.variant != Variant::BoxLp {
            return usage("tracer: the sparse score needs variant = box_lp");
        }
        if self.tracer == TracerChoice::Scaling && self.data_sparsity() != self.d {
            return usage("tracer: the scaling score needs dense data (k = d)");
        }
        if self.n == 0 {
            return usage("n: must be >= 1");
        }
        if self.m == 0 {
            return usage("m: must be >= 1");
        }
        let min_trials = if self.experiment == ExperimentKind::TraceValue { 30 } else { 1 };
        if self.trials < min_trials {
            return usage(format!("trials: must be >= {min_trials}, got {}", self.trials));
        }
        if self.pilot_trials < 30 {
            return usage(format!("pilot_trials: must be >= 30, got {}", self.pilot_trials));
        }
        if self.experiment == ExperimentKind::Sweep {
            if self.sweep_epsilons.is_empty() {
                return usage("sweep_epsilons: must list at least one epsilon");
            }
            if let Some(e) = self.sweep_epsilons.iter().find(|&&e| !(e > 0.0 && e <= 10.0)) {
                return usage(format!("sweep_epsilons: every epsilon must lie in (0, 10], got {e}"));
            }
        }
        if self.experiment == ExperimentKind::DpAudit && self.policy != PolicyKind::NullQuantile {
            return usage("policy: dp_audit needs null_quantile (the audited level is xi)");
        }
        if self.output.as_os_str().is_empty() {
            return usage("output: must be a file path");
        }
        Ok(())
    }
}
