//! Exhaustive search over Welch parameters.

use std::fmt::Write as _;

use super::config::{FeatureMethod, PipelineConfig};
use super::pipeline::{evaluate_table, extract_features, preprocess, EvalOptions};
use super::report::EvaluationReport;
use crate::signal::Dataset;
use crate::{Error, Result};

/// Candidate values for each Welch parameter; every combination is tried.
#[derive(Debug, Clone, PartialEq)]
pub struct WelchGrid {
    pub nfft: Vec<usize>,
    pub segment_len: Vec<usize>,
    pub overlap: Vec<f64>,
}

impl Default for WelchGrid {
    fn default() -> Self {
        WelchGrid {
            nfft: vec![128, 256, 512, 1024, 2048],
            segment_len: vec![125, 200, 250, 300, 350, 400, 450, 500],
            overlap: vec![0.25, 0.5, 0.75, 0.9],
        }
    }
}

impl WelchGrid {
    /// `nfft`-major, then segment length, then overlap.
    pub fn combinations(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for &n in &self.nfft {
            for &s in &self.segment_len {
                for &o in &self.overlap {
                    out.push((n, s, o));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub nfft: usize,
    pub segment_len: usize,
    pub overlap: f64,
    pub mean_accuracy: f64,
    pub mean_latency_ms: f64,
    pub report: EvaluationReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSkip {
    pub nfft: usize,
    pub segment_len: usize,
    pub overlap: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    /// Non-increasing in accuracy; equal accuracies keep grid order.
    pub rows: Vec<GridRow>,
    pub skipped: Vec<GridSkip>,
}

impl GridResult {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>6} {:>8} {:>8} {:>10} {:>12}",
            "nfft", "seg_len", "overlap", "Mean Acc.", "Time (msec)"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>6} {:>8} {:>8} {:>10.2} {:>12.3}",
                r.nfft, r.segment_len, r.overlap, r.mean_accuracy, r.mean_latency_ms
            );
        }
        s
    }
}

/// Runs every grid combination on top of `base`, reusing one pass of
/// filtering and artifact removal. Infeasible combinations and those with
/// failed folds are skipped with a reason.
pub fn grid_search_welch(
    ds: &Dataset,
    base: &PipelineConfig,
    grid: &WelchGrid,
    opts: &EvalOptions,
) -> Result<GridResult> {
    let ds = ds.excluding(&base.exclude);
    if ds.is_empty() {
        return Err(Error::InsufficientData("no trials left after exclusions".into()));
    }
    let mut base = base.clone();
    base.features.method = FeatureMethod::Welch;
    let pre = preprocess(&base, &ds, opts.jobs)?;
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (nfft, segment_len, overlap) in grid.combinations() {
        let mut cfg = base.clone();
        cfg.features.nfft = nfft;
        cfg.features.segment_len = segment_len;
        cfg.features.overlap = overlap;
        let mut skip = |reason: String| {
            log::warn!("skipping nfft={nfft} segment_len={segment_len} overlap={overlap}: {reason}");
            skipped.push(GridSkip {
                nfft,
                segment_len,
                overlap,
                reason,
            });
        };
        if let Err(e) = cfg.validate_for(&ds) {
            skip(e.to_string());
            continue;
        }
        let table = extract_features(&cfg, &ds, &pre, opts.jobs);
        let report = evaluate_table(&cfg, &ds, &table, opts)?;
        if let Some(f) = report.failed_folds().next() {
            skip(format!("fold {} failed: {}", f.id, f.failed.as_deref().unwrap_or("")));
            continue;
        }
        let Some(mean_accuracy) = report.mean_accuracy else {
            skip("no subject accuracy available".into());
            continue;
        };
        rows.push(GridRow {
            nfft,
            segment_len,
            overlap,
            mean_accuracy,
            mean_latency_ms: report.latency.mean_ms,
            report,
        });
    }
    rows.sort_by(|a, b| b.mean_accuracy.total_cmp(&a.mean_accuracy));
    Ok(GridResult { rows, skipped })
}
