//! Experiment harness: configurations, cross-validation protocols,
//! per-trial latency measurement, Welch grid search and reports.

mod config;
mod grid;
mod pipeline;
mod report;

pub use config::{
    ArtifactMethod, ArtifactSettings, ClassifierSettings, FeatureMethod, FeatureSettings,
    PipelineConfig, SelectionSettings, PRESETS,
};
pub use grid::{grid_search_welch, GridResult, GridRow, GridSkip, WelchGrid};
pub use pipeline::{
    extract_features, fit_fold, leave_one_sample_out_split, loso_folds, loso_split, preprocess,
    run_experiment, run_experiment_with, verify_no_leakage, EvalOptions, FeatureTable, FittedFold,
    Fold, Preprocessed, Protocol, TrialFeatures,
};
pub use report::{
    parse_json_lines, render_json_lines, render_table, EvaluationReport, FoldRecord,
    LatencySummary, StageLatency, SubjectResult,
};
