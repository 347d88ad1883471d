//! CSV output: a header row, one record per line, then `#summary`,
//! `#resolved` and `#config` comment rows. Floats use 17 significant digits.

use std::io::Write;
use std::path::Path;

use super::HarnessError;

pub const TRIAL_COLUMNS: [&str; 12] = [
    "point",
    "noise_sigma",
    "trial_index",
    "mu_norm_l1",
    "excess_risk",
    "t_hat_contribution",
    "recall",
    "recall_pz",
    "soundness",
    "lambda",
    "flags_count",
    "clip_events",
];

pub const VERIFY_COLUMNS: [&str; 6] = ["check", "instance", "lhs", "rhs", "rel_error", "pass"];

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

/// One trial of a trace, audit, sweep or trace-value run. Threshold-dependent
/// fields are empty for trace-value runs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    /// Sweep point index (0 outside sweeps).
    pub point: usize,
    /// Gaussian-mechanism noise scale (0 for non-private learners).
    pub noise_sigma: f64,
    pub trial_index: u64,
    pub mu_norm_l1: f64,
    pub excess_risk: f64,
    pub t_hat_contribution: f64,
    pub recall: Option<f64>,
    pub recall_pz: Option<f64>,
    pub soundness: Option<f64>,
    pub lambda: Option<f64>,
    /// Fresh points flagged (false positives).
    pub flags_count: Option<usize>,
    pub clip_events: usize,
}

impl TrialRecord {
    pub fn to_csv(&self) -> String {
        [
            self.point.to_string(),
            format_float(self.noise_sigma),
            self.trial_index.to_string(),
            format_float(self.mu_norm_l1),
            format_float(self.excess_risk),
            format_float(self.t_hat_contribution),
            opt(self.recall),
            opt(self.recall_pz),
            opt(self.soundness),
            opt(self.lambda),
            self.flags_count.map(|c| c.to_string()).unwrap_or_default(),
            self.clip_events.to_string(),
        ]
        .join(",")
    }
}

/// Quotes a field if it contains a delimiter.
pub(crate) fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes `contents` to a temporary file beside `path`, then renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), HarnessError> {
    let io = |e: std::io::Error| HarnessError::Io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
