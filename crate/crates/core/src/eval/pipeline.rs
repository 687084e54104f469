//! Per-trial pipeline execution and the cross-validation protocols.
//!
//! Filtering, source separation and feature extraction have no fitted
//! state, so they run once per trial; the selector and classifier are fit
//! per fold on training rows only. A trial's decision latency is the sum
//! of its own filter, artifact and feature times plus the selection
//! transform and prediction times measured when it is tested.

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ArtifactMethod, PipelineConfig};
use super::report::{EvaluationReport, FoldRecord, LatencySummary, StageLatency, SubjectResult};
use crate::artifact::{amuse_decompose, fastica_decompose, reconstruct, FastIcaParams};
use crate::classify::TrainedClassifier;
use crate::linalg::Matrix;
use crate::preprocessing::{apply_filter, design_filter, zero_mean, FilterCoefficients};
use crate::selection::FittedSelector;
use crate::signal::{Dataset, Trial};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Leave one subject out.
    Loso,
    /// Leave one trial out.
    LooSample,
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "loso" => Ok(Protocol::Loso),
            "loo" | "loo_sample" | "loo-sample" => Ok(Protocol::LooSample),
            other => Err(Error::config("protocol", format!("unknown protocol `{other}` (loso|loo)"))),
        }
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Protocol::Loso => "loso",
            Protocol::LooSample => "loo",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    pub protocol: Protocol,
    /// Worker threads for trials and folds; 1 keeps timing on one lane.
    pub jobs: usize,
}

impl EvalOptions {
    pub fn new(protocol: Protocol) -> Self {
        EvalOptions { protocol, jobs: 1 }
    }
}

/// Train and test trial positions of one fold; the two are disjoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub id: String,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Holds out every trial of `subject`.
pub fn loso_split(ds: &Dataset, subject: u16) -> Result<Fold> {
    let subjects = ds.subjects();
    if subjects.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "leave-one-subject-out needs at least 2 subjects, found {}",
            subjects.len()
        )));
    }
    if !subjects.contains(&subject) {
        return Err(Error::param("subject", format!("unknown subject {subject}")));
    }
    let (test, train) = (0..ds.len()).partition(|&i| ds.trials()[i].subject_id() == subject);
    Ok(Fold {
        id: format!("S{subject:03}"),
        train,
        test,
    })
}

/// One fold per subject, in ascending subject order.
pub fn loso_folds(ds: &Dataset) -> Result<Vec<Fold>> {
    let subjects = ds.subjects();
    if subjects.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "leave-one-subject-out needs at least 2 subjects, found {}",
            subjects.len()
        )));
    }
    subjects.into_iter().map(|s| loso_split(ds, s)).collect()
}

/// Fold `i` tests trial `i` and trains on the rest.
pub fn leave_one_sample_out_split(ds: &Dataset) -> impl Iterator<Item = Fold> + '_ {
    let n = ds.len();
    (0..n).map(move |i| Fold {
        id: format!("T{:04}", i + 1),
        train: (0..n).filter(|&j| j != i).collect(),
        test: vec![i],
    })
}

fn folds_for(ds: &Dataset, protocol: Protocol) -> Result<Vec<Fold>> {
    match protocol {
        Protocol::Loso => loso_folds(ds),
        Protocol::LooSample => {
            if ds.len() < 2 {
                return Err(Error::InsufficientData("leave-one-out needs at least 2 trials".into()));
            }
            Ok(leave_one_sample_out_split(ds).collect())
        }
    }
}

fn par_map<T, R, F>(jobs: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if jobs > 1 {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            return pool.install(|| items.par_iter().map(&f).collect());
        }
    }
    items.iter().map(f).collect()
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// The selected channel of one trial after filtering and artifact removal.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub signal: Vec<f64>,
    pub filter_ms: f64,
    pub artifact_ms: f64,
}

struct Stages<'a> {
    config: &'a PipelineConfig,
    channel: usize,
    filter: Option<FilterCoefficients>,
}

impl Stages<'_> {
    fn condition(&self, x: &[f64], n: usize) -> Vec<f64> {
        let x = &x[..n];
        let x = if self.config.zero_mean { zero_mean(x) } else { x.to_vec() };
        match &self.filter {
            Some(f) => apply_filter(f, &x),
            None => x,
        }
    }

    fn run(&self, t: &Trial) -> Result<Preprocessed> {
        let c = self.config;
        let n = c.trial_len(t.n_samples(), t.sample_rate())?;
        let start = Instant::now();
        if c.artifact.method == ArtifactMethod::None {
            let x = t.channel(self.channel).map_err(|e| Error::stage("filter", e))?;
            let signal = self.condition(x, n);
            return Ok(Preprocessed {
                signal,
                filter_ms: ms_since(start),
                artifact_ms: 0.0,
            });
        }
        let rows: Vec<Vec<f64>> = t.channels().map(|x| self.condition(x, n)).collect();
        let filter_ms = ms_since(start);
        let start = Instant::now();
        let r = Matrix::from_rows(&rows).map_err(|e| Error::stage("artifact", e))?;
        let d = match c.artifact.method {
            ArtifactMethod::FastIca => fastica_decompose(
                &r,
                &FastIcaParams {
                    n_comp: c.artifact.n_comp.unwrap_or(rows.len()),
                    max_iter: c.artifact.max_iter,
                    tol: c.artifact.tol,
                    seed: c.seed,
                },
            ),
            _ => amuse_decompose(&r),
        }
        .map_err(|e| Error::stage("artifact", e))?;
        if d.flagged() {
            log::warn!(
                "source separation flagged for subject {} session {}: converged={}, gaussian components={}",
                t.subject_id(),
                t.session_id(),
                d.converged,
                d.gaussian_components.iter().filter(|&&g| g).count()
            );
        }
        let keep = match c.artifact.keep {
            Some(k) => k.indices(d.n_components()),
            None => Ok((0..d.n_components()).collect()),
        }
        .map_err(|e| Error::stage("artifact", e))?;
        let signal = reconstruct(&d, &keep, self.channel).map_err(|e| Error::stage("artifact", e))?;
        Ok(Preprocessed {
            signal,
            filter_ms,
            artifact_ms: ms_since(start),
        })
    }
}

/// Filters and cleans every trial of `ds`. Configuration problems are
/// returned as errors; per-trial failures are kept as messages.
pub fn preprocess(
    config: &PipelineConfig,
    ds: &Dataset,
    jobs: usize,
) -> Result<Vec<std::result::Result<Preprocessed, String>>> {
    config.validate_signal_stages(ds)?;
    let filter = config
        .filter
        .as_ref()
        .map(|f| design_filter(f, ds.sample_rate()))
        .transpose()
        .map_err(|e| Error::config("filter", e.to_string()))?;
    let stages = Stages {
        config,
        channel: config.channel_index()?,
        filter,
    };
    let indexed: Vec<(usize, &Trial)> = ds.trials().iter().enumerate().collect();
    Ok(par_map(jobs, &indexed, |&(i, t)| {
        stages.run(t).map_err(|e| format!("trial {i}: {e}"))
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialFeatures {
    pub features: Vec<f64>,
    pub filter_ms: f64,
    pub artifact_ms: f64,
    pub features_ms: f64,
}

/// Feature vectors of every trial with labels and subjects, in trial order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub trials: Vec<std::result::Result<TrialFeatures, String>>,
    pub labels: Vec<usize>,
    pub subjects: Vec<u16>,
    pub n_classes: usize,
}

pub fn extract_features(
    config: &PipelineConfig,
    ds: &Dataset,
    pre: &[std::result::Result<Preprocessed, String>],
    jobs: usize,
) -> FeatureTable {
    let extractor = config.extractor(ds.stimulus_frequencies());
    let fs = ds.sample_rate();
    let indexed: Vec<(usize, &std::result::Result<Preprocessed, String>)> = pre.iter().enumerate().collect();
    let trials = par_map(jobs, &indexed, |&(i, p)| {
        let p = p.as_ref().map_err(Clone::clone)?;
        let start = Instant::now();
        let features = extractor
            .extract(&p.signal, fs)
            .map_err(|e| format!("trial {i}: {}", Error::stage("features", e)))?;
        Ok(TrialFeatures {
            features,
            filter_ms: p.filter_ms,
            artifact_ms: p.artifact_ms,
            features_ms: ms_since(start),
        })
    });
    FeatureTable {
        trials,
        labels: ds.class_indices(),
        subjects: ds.trials().iter().map(Trial::subject_id).collect(),
        n_classes: ds.stimulus_frequencies().len(),
    }
}

/// Selector and classifier fitted on one training fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedFold {
    pub selector: FittedSelector,
    pub classifier: TrainedClassifier,
}

impl FittedFold {
    pub fn selector_fingerprint(&self) -> u64 {
        self.selector.fingerprint()
    }

    /// Hash of the serialized model.
    pub fn classifier_fingerprint(&self) -> u64 {
        let json = serde_json::to_string(&self.classifier).unwrap_or_default();
        let mut h = DefaultHasher::new();
        json.hash(&mut h);
        h.finish()
    }
}

/// Fits the selector, then the classifier on the selected features.
pub fn fit_fold(config: &PipelineConfig, x: &Matrix, y: &[usize], n_classes: usize) -> Result<FittedFold> {
    let selector = config
        .selector()?
        .fit(x, y)
        .map_err(|e| Error::stage("selection", e))?;
    let xs = selector.apply(x).map_err(|e| Error::stage("selection", e))?;
    let classifier = config
        .classifier_spec()?
        .train(&xs, y, n_classes)
        .map_err(|e| Error::stage("classifier", e))?;
    if !classifier.converged() {
        log::warn!("classifier hit its iteration cap");
    }
    Ok(FittedFold { selector, classifier })
}

fn training_rows<'a>(table: &'a FeatureTable, idx: &[usize]) -> std::result::Result<Vec<&'a [f64]>, String> {
    idx.iter()
        .map(|&i| table.trials[i].as_ref().map(|t| t.features.as_slice()).map_err(Clone::clone))
        .collect()
}

struct TestedTrial {
    index: usize,
    correct: bool,
    latency: StageLatency,
}

struct FoldOutcome {
    record: FoldRecord,
    tested: Vec<TestedTrial>,
}

fn evaluate_fold(config: &PipelineConfig, table: &FeatureTable, fold: &Fold) -> FoldOutcome {
    let mut record = FoldRecord {
        id: fold.id.clone(),
        n_train: fold.train.len(),
        n_test: fold.test.len(),
        n_correct: 0,
        selector_fingerprint: None,
        classifier_fingerprint: None,
        failed: None,
    };
    let run = |record: &mut FoldRecord| -> std::result::Result<Vec<TestedTrial>, String> {
        let rows = training_rows(table, &fold.train)?;
        training_rows(table, &fold.test)?;
        let x = Matrix::from_rows(&rows).map_err(|e| Error::stage("features", e).to_string())?;
        let y: Vec<usize> = fold.train.iter().map(|&i| table.labels[i]).collect();
        let fitted = fit_fold(config, &x, &y, table.n_classes).map_err(|e| e.to_string())?;
        record.selector_fingerprint = Some(fitted.selector_fingerprint());
        record.classifier_fingerprint = Some(fitted.classifier_fingerprint());
        fold.test
            .iter()
            .map(|&i| {
                let t = table.trials[i].as_ref().map_err(Clone::clone)?;
                let start = Instant::now();
                let row = Matrix::from_rows(&[&t.features])
                    .and_then(|m| fitted.selector.apply(&m))
                    .map_err(|e| format!("trial {i}: {}", Error::stage("selection", e)))?;
                let selection_ms = ms_since(start);
                let start = Instant::now();
                let pred = fitted
                    .classifier
                    .predict(row.row(0))
                    .map_err(|e| format!("trial {i}: {}", Error::stage("classifier", e)))?;
                let predict_ms = ms_since(start);
                Ok(TestedTrial {
                    index: i,
                    correct: pred == table.labels[i],
                    latency: StageLatency {
                        filter_ms: t.filter_ms,
                        artifact_ms: t.artifact_ms,
                        features_ms: t.features_ms,
                        selection_ms,
                        predict_ms,
                    },
                })
            })
            .collect()
    };
    match run(&mut record) {
        Ok(tested) => {
            record.n_correct = tested.iter().filter(|t| t.correct).count();
            FoldOutcome { record, tested }
        }
        Err(msg) => {
            log::error!("fold {} failed: {msg}", fold.id);
            record.failed = Some(msg);
            FoldOutcome {
                record,
                tested: Vec::new(),
            }
        }
    }
}

fn summarize_latency(tested: &[&TestedTrial]) -> LatencySummary {
    if tested.is_empty() {
        return LatencySummary::default();
    }
    let n = tested.len() as f64;
    let mut totals: Vec<f64> = tested.iter().map(|t| t.latency.total()).collect();
    totals.sort_by(f64::total_cmp);
    let m = totals.len();
    let median_ms = if m % 2 == 1 {
        totals[m / 2]
    } else {
        0.5 * (totals[m / 2 - 1] + totals[m / 2])
    };
    let mean = |f: fn(&StageLatency) -> f64| tested.iter().map(|t| f(&t.latency)).sum::<f64>() / n;
    LatencySummary {
        n_trials: tested.len(),
        mean_ms: totals.iter().sum::<f64>() / n,
        median_ms,
        stages: StageLatency {
            filter_ms: mean(|s| s.filter_ms),
            artifact_ms: mean(|s| s.artifact_ms),
            features_ms: mean(|s| s.features_ms),
            selection_ms: mean(|s| s.selection_ms),
            predict_ms: mean(|s| s.predict_ms),
        },
    }
}

/// Runs `protocol` over an already-extracted feature table of `ds`.
pub(super) fn evaluate_table(
    config: &PipelineConfig,
    ds: &Dataset,
    table: &FeatureTable,
    opts: &EvalOptions,
) -> Result<EvaluationReport> {
    let folds = folds_for(ds, opts.protocol)?;
    let outcomes = par_map(opts.jobs, &folds, |f| evaluate_fold(config, table, f));

    #[derive(Default)]
    struct Tally {
        n_trials: usize,
        n_correct: usize,
        failed: Option<String>,
    }
    let mut tally: BTreeMap<u16, Tally> = BTreeMap::new();
    for (fold, out) in folds.iter().zip(&outcomes) {
        for &i in &fold.test {
            let t = tally.entry(table.subjects[i]).or_default();
            t.n_trials += 1;
            if let Some(msg) = &out.record.failed {
                t.failed.get_or_insert_with(|| format!("fold {}: {msg}", fold.id));
            }
        }
        for tt in &out.tested {
            if tt.correct {
                tally.entry(table.subjects[tt.index]).or_default().n_correct += 1;
            }
        }
    }
    let subjects: Vec<SubjectResult> = tally
        .into_iter()
        .map(|(subject, t)| SubjectResult {
            subject,
            n_trials: t.n_trials,
            n_correct: t.n_correct,
            accuracy: match t.failed {
                None if t.n_trials > 0 => Some(100.0 * t.n_correct as f64 / t.n_trials as f64),
                _ => None,
            },
            failed: t.failed,
        })
        .collect();
    let acc: Vec<f64> = subjects.iter().filter_map(|s| s.accuracy).collect();
    let mean_accuracy = (!acc.is_empty()).then(|| acc.iter().sum::<f64>() / acc.len() as f64);
    let tested: Vec<&TestedTrial> = outcomes.iter().flat_map(|o| &o.tested).collect();
    Ok(EvaluationReport {
        protocol: opts.protocol,
        config: config.clone(),
        subjects,
        mean_accuracy,
        latency: summarize_latency(&tested),
        folds: outcomes.into_iter().map(|o| o.record).collect(),
    })
}

/// [`run_experiment_with`] on a single lane.
pub fn run_experiment(config: &PipelineConfig, ds: &Dataset, protocol: Protocol) -> Result<EvaluationReport> {
    run_experiment_with(config, ds, &EvalOptions::new(protocol))
}

/// Applies the configured exclusions, then evaluates every fold. Stage
/// failures mark the fold failed instead of aborting the run.
pub fn run_experiment_with(config: &PipelineConfig, ds: &Dataset, opts: &EvalOptions) -> Result<EvaluationReport> {
    let ds = ds.excluding(&config.exclude);
    if ds.is_empty() {
        return Err(Error::InsufficientData("no trials left after exclusions".into()));
    }
    config.validate_for(&ds)?;
    let pre = preprocess(config, &ds, opts.jobs)?;
    let table = extract_features(config, &ds, &pre, opts.jobs);
    evaluate_table(config, &ds, &table, opts)
}

/// Refits every successful fold of `report` from the training trials
/// alone, recomputing their features from scratch, and reports whether
/// both fingerprints match the recorded ones.
pub fn verify_no_leakage(report: &EvaluationReport, ds: &Dataset) -> Result<Vec<(String, bool)>> {
    let config = &report.config;
    let ds = ds.excluding(&config.exclude);
    let folds = folds_for(&ds, report.protocol)?;
    let mut out = Vec::new();
    for fold in &folds {
        let Some(rec) = report.folds.iter().find(|r| r.id == fold.id && r.failed.is_none()) else {
            continue;
        };
        let train = ds.subset(&fold.train);
        config.validate_for(&train)?;
        let pre = preprocess(config, &train, 1)?;
        let table = extract_features(config, &train, &pre, 1);
        let all: Vec<usize> = (0..train.len()).collect();
        let rows = training_rows(&table, &all).map_err(Error::Numerical)?;
        let x = Matrix::from_rows(&rows)?;
        let fitted = fit_fold(config, &x, &table.labels, table.n_classes)?;
        let same = rec.selector_fingerprint == Some(fitted.selector_fingerprint())
            && rec.classifier_fingerprint == Some(fitted.classifier_fingerprint());
        out.push((fold.id.clone(), same));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{synthesize, DatasetParams, SynthSpec};

    fn tiny(n_subjects: usize, snr: f64) -> Dataset {
        synthesize(
            &SynthSpec {
                n_subjects,
                n_trials_per_freq: 3,
                snr_db: vec![snr],
                channel_count: 4,
                seed: 5,
                ..SynthSpec::default()
            },
            &DatasetParams {
                duration_s: 2.0,
                ..DatasetParams::default()
            },
        )
        .unwrap()
    }

    fn quick_config() -> PipelineConfig {
        PipelineConfig::from_text("channel = 1\nduration = 2").unwrap()
    }

    #[test]
    fn loso_counts_and_partition() {
        let ds = tiny(3, 10.0);
        let f = loso_split(&ds, 2).unwrap();
        assert_eq!((f.train.len(), f.test.len()), (30, 15));
        let folds = loso_folds(&ds).unwrap();
        assert_eq!(folds.len(), 3);
        let mut seen = vec![0; ds.len()];
        for f in &folds {
            assert!(f.train.iter().all(|i| !f.test.contains(i)));
            assert_eq!(f.train.len() + f.test.len(), ds.len());
            f.test.iter().for_each(|&i| seen[i] += 1);
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert!(loso_split(&ds, 9).is_err());
        assert!(loso_split(&tiny(1, 0.0), 1).is_err());
    }

    #[test]
    fn loso_follows_unequal_trial_counts() {
        let ds = tiny(3, 10.0);
        // drop two trials of subject 1
        let keep: Vec<usize> = (2..ds.len()).collect();
        let ds = ds.subset(&keep);
        let f = loso_split(&ds, 1).unwrap();
        assert_eq!((f.test.len(), f.train.len()), (13, 30));
    }

    #[test]
    fn leave_one_out_folds() {
        let ds = tiny(1, 0.0).subset(&[0, 1, 2, 3, 4]);
        let folds: Vec<Fold> = leave_one_sample_out_split(&ds).collect();
        assert_eq!(folds.len(), 5);
        for (i, f) in folds.iter().enumerate() {
            assert_eq!(f.test, vec![i]);
            assert_eq!(f.train.len(), 4);
        }
    }

    #[test]
    fn experiment_is_deterministic_and_consistent() {
        let ds = tiny(3, 15.0);
        let c = quick_config();
        let a = run_experiment(&c, &ds, Protocol::Loso).unwrap();
        let b = run_experiment_with(&c, &ds, &EvalOptions { protocol: Protocol::Loso, jobs: 3 }).unwrap();
        let accs = |r: &EvaluationReport| r.subjects.iter().map(|s| s.accuracy).collect::<Vec<_>>();
        assert_eq!(accs(&a), accs(&b));
        assert_eq!(a.folds.iter().map(|f| f.classifier_fingerprint).collect::<Vec<_>>(),
                   b.folds.iter().map(|f| f.classifier_fingerprint).collect::<Vec<_>>());
        assert!(!a.has_failures());
        let mean = a.subjects.iter().map(|s| s.accuracy.unwrap()).sum::<f64>() / 3.0;
        assert!((a.mean_accuracy.unwrap() - mean).abs() < 1e-12);
        for s in &a.subjects {
            let acc = s.accuracy.unwrap();
            assert!((0.0..=100.0).contains(&acc));
            assert_eq!(s.n_trials, 15);
        }
        assert!(a.mean_accuracy.unwrap() >= 80.0, "{:?}", a.mean_accuracy);
        assert_eq!(a.latency.n_trials, ds.len());
        assert!(a.latency.mean_ms > 0.0 && a.latency.median_ms > 0.0);
        let s = a.latency.stages;
        assert!((s.total() - a.latency.mean_ms).abs() < 1e-9 * (1.0 + a.latency.mean_ms));
        assert!(verify_no_leakage(&a, &ds).unwrap().iter().all(|(_, ok)| *ok));
    }

    #[test]
    fn leakage_check_detects_foreign_fit() {
        let ds = tiny(3, 15.0);
        let mut r = run_experiment(&quick_config(), &ds, Protocol::Loso).unwrap();
        // a model fit on the whole dataset cannot match a training-only refit
        let pre = preprocess(&r.config, &ds, 1).unwrap();
        let table = extract_features(&r.config, &ds, &pre, 1);
        let all: Vec<usize> = (0..ds.len()).collect();
        let x = Matrix::from_rows(&training_rows(&table, &all).unwrap()).unwrap();
        let leaky = fit_fold(&r.config, &x, &table.labels, table.n_classes).unwrap();
        r.folds[0].classifier_fingerprint = Some(leaky.classifier_fingerprint());
        let checks = verify_no_leakage(&r, &ds).unwrap();
        assert!(!checks[0].1);
        assert!(checks[1..].iter().all(|(_, ok)| *ok));
    }

    #[test]
    fn failed_fold_is_reported() {
        let ds = tiny(3, 15.0);
        // only subject 1 shows the first stimulus, so the fold holding it
        // out trains LDA without that class
        let mut c = quick_config();
        c.set("clf.method", "lda").unwrap();
        let keep: Vec<usize> = (0..ds.len())
            .filter(|&i| {
                let t = &ds.trials()[i];
                t.subject_id() == 1 || (t.label() - 6.66).abs() > 1e-6
            })
            .collect();
        let ds = ds.subset(&keep);
        let r = run_experiment(&c, &ds, Protocol::Loso).unwrap();
        let failed: Vec<&FoldRecord> = r.failed_folds().collect();
        assert_eq!(failed.len(), 1, "{:?}", r.folds);
        assert!(failed[0].failed.as_ref().unwrap().contains("classifier stage"));
        let s1 = r.subject(1).unwrap();
        assert!(s1.accuracy.is_none());
        assert!(s1.failed.as_ref().unwrap().starts_with("fold S001"));
        let rest = (r.subject(2).unwrap().accuracy.unwrap() + r.subject(3).unwrap().accuracy.unwrap()) / 2.0;
        assert!((r.mean_accuracy.unwrap() - rest).abs() < 1e-12);
    }

    #[test]
    fn exclusions_and_config_errors() {
        let ds = tiny(3, 15.0);
        let mut c = quick_config();
        c.exclude = vec![(3, None)];
        let r = run_experiment(&c, &ds, Protocol::Loso).unwrap();
        assert_eq!(r.subjects.len(), 2);
        let mut c = quick_config();
        c.channel = 5;
        assert!(matches!(run_experiment(&c, &ds, Protocol::Loso), Err(Error::Config { key, .. }) if key == "channel"));
        let mut c = quick_config();
        c.set("select.method", "svd").unwrap();
        c.set("select.d", "5000").unwrap();
        assert!(matches!(run_experiment(&c, &ds, Protocol::Loso), Err(Error::Config { key, .. }) if key == "select.d"));
    }

    #[test]
    fn artifact_and_selection_stages_run() {
        let ds = tiny(2, 15.0);
        let c = PipelineConfig::from_text(
            "channel = 1\nduration = 2\nartifact.method = amuse\nartifact.keep = 1..3\nselect.method = mrmr\nselect.d = 20\nclf.kernel = spearman",
        )
        .unwrap();
        let r = run_experiment(&c, &ds, Protocol::Loso).unwrap();
        assert!(!r.has_failures(), "{:?}", r.folds);
        assert!(r.latency.stages.artifact_ms > 0.0);
    }
}
