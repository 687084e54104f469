//! Evaluation reports: aligned text tables and a line-delimited JSON log.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::pipeline::Protocol;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectResult {
    pub subject: u16,
    /// Test trials of this subject across all folds.
    pub n_trials: usize,
    pub n_correct: usize,
    /// Percentage in `[0, 100]`; `None` when a fold testing this subject failed.
    pub accuracy: Option<f64>,
    pub failed: Option<String>,
}

/// Mean per-trial milliseconds spent in each test-time stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageLatency {
    pub filter_ms: f64,
    pub artifact_ms: f64,
    pub features_ms: f64,
    pub selection_ms: f64,
    pub predict_ms: f64,
}

impl StageLatency {
    pub fn total(&self) -> f64 {
        self.filter_ms + self.artifact_ms + self.features_ms + self.selection_ms + self.predict_ms
    }
}

/// Per-trial decision latency over every successfully classified test
/// trial; zero when there are none.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub n_trials: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub stages: StageLatency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub id: String,
    pub n_train: usize,
    pub n_test: usize,
    pub n_correct: usize,
    pub selector_fingerprint: Option<u64>,
    pub classifier_fingerprint: Option<u64>,
    pub failed: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub protocol: Protocol,
    pub config: PipelineConfig,
    pub subjects: Vec<SubjectResult>,
    /// Unweighted mean of the per-subject accuracies that are available.
    pub mean_accuracy: Option<f64>,
    pub latency: LatencySummary,
    pub folds: Vec<FoldRecord>,
}

impl EvaluationReport {
    pub fn failed_folds(&self) -> impl Iterator<Item = &FoldRecord> {
        self.folds.iter().filter(|f| f.failed.is_some())
    }

    pub fn has_failures(&self) -> bool {
        self.failed_folds().next().is_some()
    }

    pub fn subject(&self, id: u16) -> Option<&SubjectResult> {
        self.subjects.iter().find(|s| s.subject == id)
    }
}

const LABEL_W: usize = 13;
const VALUE_W: usize = 10;

/// Per-subject rows followed by `Mean Acc.` and `Time (msec)` rows and a
/// per-stage breakdown. With no subjects only the header is printed.
pub fn render_table(r: &EvaluationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<LABEL_W$}{:>VALUE_W$}", "Sub. ID", "Acc. (%)");
    if r.subjects.is_empty() {
        return s;
    }
    for sub in &r.subjects {
        let v = sub.accuracy.map_or_else(|| "FAILED".to_string(), |a| format!("{a:.2}"));
        let _ = writeln!(s, "{:<LABEL_W$}{v:>VALUE_W$}", format!("S{:03}", sub.subject));
    }
    let mean = r.mean_accuracy.map_or_else(|| "n/a".to_string(), |a| format!("{a:.2}"));
    let _ = writeln!(s, "{:<LABEL_W$}{mean:>VALUE_W$}", "Mean Acc.");
    let l = &r.latency;
    let _ = writeln!(s, "{:<LABEL_W$}{:>VALUE_W$.3}", "Time (msec)", l.mean_ms);
    let _ = writeln!(s, "{:<LABEL_W$}{:>VALUE_W$.3}", "Median (msec)", l.median_ms);
    for (name, v) in [
        ("  filter", l.stages.filter_ms),
        ("  artifact", l.stages.artifact_ms),
        ("  features", l.stages.features_ms),
        ("  selection", l.stages.selection_ms),
        ("  predict", l.stages.predict_ms),
    ] {
        let _ = writeln!(s, "{name:<LABEL_W$}{v:>VALUE_W$.3}");
    }
    for f in r.failed_folds() {
        let _ = writeln!(s, "fold {} failed: {}", f.id, f.failed.as_deref().unwrap_or(""));
    }
    s
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Line {
    Header {
        protocol: Protocol,
        /// Configuration in `key = value` form.
        config: String,
    },
    Subject(SubjectResult),
    Fold(FoldRecord),
    Summary {
        mean_accuracy: Option<f64>,
        latency: LatencySummary,
    },
}

/// One JSON object per line: a header, the subjects, the folds and a summary.
pub fn render_json_lines(r: &EvaluationReport) -> String {
    let mut lines = vec![Line::Header {
        protocol: r.protocol,
        config: r.config.to_text(),
    }];
    lines.extend(r.subjects.iter().cloned().map(Line::Subject));
    lines.extend(r.folds.iter().cloned().map(Line::Fold));
    lines.push(Line::Summary {
        mean_accuracy: r.mean_accuracy,
        latency: r.latency,
    });
    lines
        .iter()
        .map(|l| serde_json::to_string(l).expect("report records serialize") + "\n")
        .collect()
}

/// Inverse of [`render_json_lines`].
pub fn parse_json_lines(text: &str) -> Result<EvaluationReport> {
    let mut header = None;
    let mut summary = None;
    let mut subjects = Vec::new();
    let mut folds = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let line: Line = serde_json::from_str(raw)
            .map_err(|e| Error::Format(format!("report line {}: {e}", no + 1)))?;
        match line {
            Line::Header { protocol, config } => {
                if header.is_some() {
                    return Err(Error::Format("duplicate header record".into()));
                }
                header = Some((protocol, PipelineConfig::from_text(&config)?));
            }
            Line::Subject(s) => subjects.push(s),
            Line::Fold(f) => folds.push(f),
            Line::Summary {
                mean_accuracy,
                latency,
            } => summary = Some((mean_accuracy, latency)),
        }
    }
    let (protocol, config) = header.ok_or_else(|| Error::Format("missing header record".into()))?;
    let (mean_accuracy, latency) =
        summary.ok_or_else(|| Error::Format("missing summary record".into()))?;
    Ok(EvaluationReport {
        protocol,
        config,
        subjects,
        mean_accuracy,
        latency,
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(subjects: Vec<SubjectResult>) -> EvaluationReport {
        EvaluationReport {
            protocol: Protocol::Loso,
            config: PipelineConfig::preset("optimal").unwrap(),
            mean_accuracy: None,
            latency: LatencySummary::default(),
            folds: Vec::new(),
            subjects,
        }
    }

    fn subject(id: u16, n: usize, c: usize) -> SubjectResult {
        SubjectResult {
            subject: id,
            n_trials: n,
            n_correct: c,
            accuracy: Some(100.0 * c as f64 / n as f64),
            failed: None,
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let t = render_table(&report(Vec::new()));
        assert_eq!(t.lines().count(), 1);
        assert!(t.starts_with("Sub. ID"));
    }

    #[test]
    fn single_subject_mean_row() {
        let mut r = report(vec![subject(1, 20, 20)]);
        r.mean_accuracy = Some(100.0);
        let t = render_table(&r);
        assert!(t.contains("S001"));
        let mean = t.lines().find(|l| l.starts_with("Mean Acc.")).unwrap();
        assert!(mean.trim_end().ends_with("100.00"));
        assert!(t.lines().any(|l| l.starts_with("Time (msec)")));
    }

    #[test]
    fn json_lines_round_trip() {
        let mut r = report(vec![subject(1, 23, 17), subject(7, 3, 1)]);
        r.subjects.push(SubjectResult {
            subject: 9,
            n_trials: 5,
            n_correct: 0,
            accuracy: None,
            failed: Some("fold S009: selection stage failed: \"quoted\"".into()),
        });
        r.mean_accuracy = Some((r.subjects[0].accuracy.unwrap() + r.subjects[1].accuracy.unwrap()) / 2.0);
        r.latency = LatencySummary {
            n_trials: 26,
            mean_ms: 0.1 + 0.2,
            median_ms: 1.0 / 3.0,
            stages: StageLatency {
                filter_ms: 1e-7,
                artifact_ms: 0.0,
                features_ms: std::f64::consts::PI,
                selection_ms: 2.5e-3,
                predict_ms: 1.0 / 7.0,
            },
        };
        r.folds.push(FoldRecord {
            id: "S001".into(),
            n_train: 26,
            n_test: 23,
            n_correct: 17,
            selector_fingerprint: Some(u64::MAX),
            classifier_fingerprint: Some(12345),
            failed: None,
        });
        r.config.exclude = vec![(3, Some(2))];
        let back = parse_json_lines(&render_json_lines(&r)).unwrap();
        assert_eq!(back, r);
        assert!(parse_json_lines("").is_err());
        assert!(parse_json_lines("{\"record\":\"nope\"}").is_err());
    }
}
