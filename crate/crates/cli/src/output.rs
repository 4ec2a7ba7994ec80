//! File and stdout emission: atomic writes, tables, and CSV rendering.

use anyhow::{Context, Result};
use std::io::Write;
use std::path::{Path, PathBuf};

use cbm_core::report::{RateReport, ReportEntry, Verdict};
use cbm_core::suites::VerifyOutput;

/// Write bytes to `dir/name` atomically (temp file + rename), so partial
/// runs never leave truncated outputs.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temp file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    let target = dir.join(name);
    tmp.persist(&target)
        .with_context(|| format!("renaming into {}", target.display()))?;
    Ok(target)
}

pub fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "FAIL",
        Verdict::Skip => "skip",
    }
}

/// Human-readable table of report entries.
pub fn entries_table(entries: &[ReportEntry]) -> String {
    let mut out = String::new();
    let name_w = entries.iter().map(|e| e.name.len()).max().unwrap_or(4).max(4);
    out.push_str(&format!(
        "{:<5} {:<name_w$} {:>14} {:>14} {:>12} {:>12} {:>9}\n",
        "", "name", "estimate", "target", "tolerance", "p_value", "n"
    ));
    for e in entries {
        let p = e
            .p_value
            .map(|p| format!("{p:.3e}"))
            .unwrap_or_else(|| "-".to_string());
        out.push_str(&format!(
            "{:<5} {:<name_w$} {:>14.6e} {:>14.6e} {:>12.3e} {:>12} {:>9}\n",
            verdict_str(e.verdict),
            e.name,
            e.estimate,
            e.target,
            e.tolerance,
            p,
            e.sample_size
        ));
    }
    out
}

/// CSV of report entries with lossless doubles.
pub fn entries_csv(entries: &[ReportEntry]) -> String {
    let mut out = String::from("name,estimate,standard_error,p_value,target,tolerance,verdict,sample_size,seed\n");
    for e in entries {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            e.name,
            e.estimate,
            opt(e.standard_error),
            opt(e.p_value),
            e.target,
            e.tolerance,
            verdict_str(e.verdict),
            e.sample_size,
            e.seed
        ));
    }
    out
}

pub fn rate_table(r: &RateReport) -> String {
    let mut out = String::from(
        "  epsilon    reps    sup_q50    sup_q90    sup_q99  ratio_q50  ratio_q90  ratio_q99\n",
    );
    for row in &r.rows {
        out.push_str(&format!(
            "{:>9} {:>7} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}\n",
            row.epsilon,
            row.reps,
            row.sup_q50,
            row.sup_q90,
            row.sup_q99,
            row.ratio_q50,
            row.ratio_q90,
            row.ratio_q99
        ));
    }
    out.push_str(&format!("  trend: {}\n", verdict_str(r.trend_verdict)));
    out
}

pub fn rate_csv(r: &RateReport) -> String {
    let mut out =
        String::from("epsilon,reps,sup_q50,sup_q90,sup_q99,ratio_q50,ratio_q90,ratio_q99\n");
    for row in &r.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.epsilon,
            row.reps,
            row.sup_q50,
            row.sup_q90,
            row.sup_q99,
            row.ratio_q50,
            row.ratio_q90,
            row.ratio_q99
        ));
    }
    out
}

/// Render a verify output per the requested format.
pub fn render_verify(output: &VerifyOutput, format: &str) -> Result<String> {
    Ok(match format {
        "json" => serde_json::to_string_pretty(output)? + "\n",
        "csv" => {
            let mut s = entries_csv(&output.entries);
            if let Some(rate) = &output.rate {
                s.push('\n');
                s.push_str(&rate_csv(rate));
            }
            s
        }
        _ => {
            let mut s = format!("suite: {}  seed: {}\n", output.suite, output.seed);
            s.push_str(&entries_table(&output.entries));
            if let Some(rate) = &output.rate {
                s.push_str(&rate_table(rate));
            }
            let fails = output
                .entries
                .iter()
                .filter(|e| e.verdict == Verdict::Fail)
                .count();
            let skips = output
                .entries
                .iter()
                .filter(|e| e.verdict == Verdict::Skip)
                .count();
            s.push_str(&format!(
                "{} entries: {} failed, {} skipped\n",
                output.entries.len(),
                fails,
                skips
            ));
            s
        }
    })
}
