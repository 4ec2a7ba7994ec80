//! Structured results of the verification checks.
//!
//! Every entry carries everything needed to reproduce it: the master seed,
//! the sample size, the estimate, its uncertainty, and the acceptance rule.
//! Verdicts are a pure function of the stored numbers:
//!
//! * entries with a `p_value` pass when `p_value >= target` (the target is
//!   the significance level, e.g. 0.01);
//! * all other entries pass when `|estimate - target| <= tolerance`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportEntry {
    pub name: String,
    pub estimate: f64,
    pub standard_error: Option<f64>,
    pub p_value: Option<f64>,
    pub target: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    pub sample_size: u64,
    pub seed: u64,
    pub note: Option<String>,
}

impl ReportEntry {
    /// Entry judged by `|estimate - target| <= tolerance`.
    pub fn with_tolerance(
        name: impl Into<String>,
        estimate: f64,
        standard_error: Option<f64>,
        target: f64,
        tolerance: f64,
        sample_size: u64,
        seed: u64,
    ) -> Self {
        let verdict = if (estimate - target).abs() <= tolerance {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        ReportEntry {
            name: name.into(),
            estimate,
            standard_error,
            p_value: None,
            target,
            tolerance,
            verdict,
            sample_size,
            seed,
            note: None,
        }
    }

    /// Entry judged by `p_value >= level`.
    pub fn with_pvalue(
        name: impl Into<String>,
        statistic: f64,
        p_value: f64,
        level: f64,
        sample_size: u64,
        seed: u64,
    ) -> Self {
        let verdict = if p_value >= level {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        ReportEntry {
            name: name.into(),
            estimate: statistic,
            standard_error: None,
            p_value: Some(p_value),
            target: level,
            tolerance: 0.0,
            verdict,
            sample_size,
            seed,
            note: None,
        }
    }

    /// Informational entry: a value recorded for inspection, not asserted.
    /// Carries the skip verdict so it never decides a run.
    pub fn diagnostic(
        name: impl Into<String>,
        estimate: f64,
        sample_size: u64,
        seed: u64,
        note: impl Into<String>,
    ) -> Self {
        ReportEntry {
            name: name.into(),
            estimate,
            standard_error: None,
            p_value: None,
            target: 0.0,
            tolerance: 0.0,
            verdict: Verdict::Skip,
            sample_size,
            seed,
            note: Some(note.into()),
        }
    }

    /// Entry for a check that could not run (degenerate input, too little
    /// data). Never counts as a failure.
    pub fn skipped(name: impl Into<String>, note: impl Into<String>, seed: u64) -> Self {
        ReportEntry {
            name: name.into(),
            estimate: 0.0,
            standard_error: None,
            p_value: None,
            target: 0.0,
            tolerance: 0.0,
            verdict: Verdict::Skip,
            sample_size: 0,
            seed,
            note: Some(note.into()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Result set of one verification suite.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatReport {
    pub seed: u64,
    pub entries: Vec<ReportEntry>,
}

impl StatReport {
    pub fn new(seed: u64) -> Self {
        StatReport {
            seed,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, entry: ReportEntry) {
        self.entries.push(entry);
    }

    pub fn extend(&mut self, entries: impl IntoIterator<Item = ReportEntry>) {
        self.entries.extend(entries);
    }

    pub fn any_fail(&self) -> bool {
        self.entries.iter().any(|e| e.verdict == Verdict::Fail)
    }
}

/// One row of the rate experiment: sup-error quantiles at a given epsilon
/// and the same quantiles normalized by `eps^(1/2) * (log 1/eps)^(5/2)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateRow {
    pub epsilon: f64,
    pub reps: u64,
    pub sup_q50: f64,
    pub sup_q90: f64,
    pub sup_q99: f64,
    pub ratio_q50: f64,
    pub ratio_q90: f64,
    pub ratio_q99: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateReport {
    pub seed: u64,
    /// Rows sorted by decreasing epsilon.
    pub rows: Vec<RateRow>,
    /// Pass when the 0.99 normalized-ratio quantile is non-increasing along
    /// decreasing epsilon, allowing 10% slack per step.
    pub trend_verdict: Verdict,
}

impl RateReport {
    pub fn any_fail(&self) -> bool {
        self.trend_verdict == Verdict::Fail
    }
}

/// The rate function of the strong-approximation bound.
pub fn rate_normalizer(eps: f64) -> f64 {
    eps.sqrt() * (1.0 / eps).ln().powf(2.5)
}
