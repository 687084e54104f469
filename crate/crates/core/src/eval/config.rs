//! Flat `key = value` experiment configuration with named presets.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::artifact::KeepRange;
use crate::classify::{
    AdaBoostParams, BaggingParams, ClassifierSpec, KernelKind, KernelSpec, SvmParams, TreeParams,
    DEFAULT_MINKOWSKI_P,
};
use crate::features::{
    harmonic_targets, FeatureExtractor, FreqRange, WelchParams, Window, DEFAULT_GOERTZEL_HARMONICS,
};
use crate::preprocessing::{FilterFamily, FilterSpec};
use crate::selection::{Criterion, FeatureSelector, DEFAULT_BINS, DEFAULT_SVD_D};
use crate::signal::Dataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactMethod {
    None,
    Amuse,
    FastIca,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactSettings {
    pub method: ArtifactMethod,
    /// `None` keeps every component.
    pub keep: Option<KeepRange>,
    /// FastICA component count; `None` means one per channel.
    pub n_comp: Option<usize>,
    pub max_iter: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMethod {
    Periodogram,
    Welch,
    Goertzel,
    YuleAr,
    Stft,
    Dwt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSettings {
    pub method: FeatureMethod,
    pub nfft: usize,
    pub segment_len: usize,
    pub overlap: f64,
    pub window: Window,
    /// STFT hop; `None` means half a segment.
    pub hop: Option<usize>,
    pub ar_order: usize,
    pub levels: usize,
    pub freq_range: FreqRange,
    pub harmonics: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSettings {
    /// `none`, `pca`, `svd` or a criterion name.
    pub method: String,
    pub d: usize,
    pub beta: f64,
    pub gamma: f64,
    pub bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSettings {
    pub method: String,
    pub kernel: KernelKind,
    pub c: f64,
    /// `None` means `1 / n_features`.
    pub gamma: Option<f64>,
    pub p: f64,
    pub k: usize,
    pub n_learners: usize,
    pub max_depth: Option<usize>,
    /// `None` follows the top-level seed.
    pub seed: Option<u64>,
}

/// One complete pipeline configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// 1-based channel number.
    pub channel: usize,
    /// Leading seconds of each trial that are used; `None` uses all.
    pub duration_s: Option<f64>,
    pub zero_mean: bool,
    /// `None` disables filtering.
    pub filter: Option<FilterSpec>,
    pub artifact: ArtifactSettings,
    pub features: FeatureSettings,
    pub selection: SelectionSettings,
    pub classifier: ClassifierSettings,
    /// `(subject, session)` pairs dropped before evaluation; `None`
    /// drops every session of the subject.
    pub exclude: Vec<(u16, Option<u16>)>,
    pub seed: u64,
}

pub const PRESETS: [&str; 2] = ["default", "optimal"];

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            channel: 126,
            duration_s: Some(5.0),
            zero_mean: true,
            filter: Some(FilterSpec::default()),
            artifact: ArtifactSettings {
                method: ArtifactMethod::None,
                keep: None,
                n_comp: None,
                max_iter: 200,
                tol: 1e-6,
            },
            features: FeatureSettings {
                method: FeatureMethod::Welch,
                nfft: 512,
                segment_len: 156,
                overlap: 0.5,
                window: Window::Hamming,
                hop: None,
                ar_order: 20,
                levels: 5,
                freq_range: FreqRange::default(),
                harmonics: DEFAULT_GOERTZEL_HARMONICS,
            },
            selection: SelectionSettings {
                method: "none".into(),
                d: DEFAULT_SVD_D,
                beta: 1.0,
                gamma: 1.0,
                bins: DEFAULT_BINS,
            },
            classifier: ClassifierSettings {
                method: "svm".into(),
                kernel: KernelKind::Linear,
                c: 1.0,
                gamma: None,
                p: DEFAULT_MINKOWSKI_P,
                k: 1,
                n_learners: 100,
                max_depth: None,
                seed: None,
            },
            exclude: Vec::new(),
            seed: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::config(key, format!("expected a boolean, got `{value}`"))),
    }
}

fn parse_opt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value.trim().to_ascii_lowercase().as_str() {
        "none" | "auto" | "" => Ok(None),
        _ => parse(key, value).map(Some),
    }
}

fn parse_range(key: &str, value: &str) -> Result<FreqRange> {
    let v = value.trim();
    let (a, b) = v
        .split_once("..")
        .or_else(|| v.split_once('-'))
        .ok_or_else(|| Error::config(key, format!("expected lo-hi, got `{value}`")))?;
    let r = FreqRange::new(parse(key, a)?, parse(key, b)?);
    if !(r.lo <= r.hi) {
        return Err(Error::config(key, "lower bound exceeds upper bound"));
    }
    Ok(r)
}

fn parse_exclude(key: &str, value: &str) -> Result<Vec<(u16, Option<u16>)>> {
    value
        .trim()
        .trim_start_matches('[')
        .trim_end_matches(']')
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| match item.split_once(':') {
            Some((s, sess)) => Ok((parse(key, s)?, Some(parse(key, sess)?))),
            None => Ok((parse(key, item)?, None)),
        })
        .collect()
}

fn fmt_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
}

impl PipelineConfig {
    pub fn preset(name: &str) -> Result<PipelineConfig> {
        let mut c = PipelineConfig::default();
        match name.trim().to_ascii_lowercase().as_str() {
            "default" => {}
            "optimal" => {
                c.channel = 138;
                if let Some(f) = c.filter.as_mut() {
                    f.family = FilterFamily::IirElliptic;
                }
                c.artifact.method = ArtifactMethod::Amuse;
                c.artifact.keep = Some(KeepRange::new(16, 252)?);
                c.features.segment_len = 350;
                c.features.overlap = 0.75;
                c.selection.method = "svd".into();
                c.selection.d = DEFAULT_SVD_D;
                c.classifier.kernel = KernelKind::Spearman;
            }
            other => {
                return Err(Error::config(
                    "preset",
                    format!("unknown preset `{other}` (expected one of {PRESETS:?})"),
                ))
            }
        }
        Ok(c)
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let k = key.trim();
        let v = value.trim();
        let filter = || FilterSpec::default();
        match k {
            "channel" => self.channel = parse(k, v)?,
            "duration" => self.duration_s = parse_opt(k, v)?,
            "zero_mean" => self.zero_mean = parse_bool(k, v)?,
            "seed" => self.seed = parse(k, v)?,
            "exclude" => self.exclude = parse_exclude(k, v)?,
            "filter.family" => {
                if v.eq_ignore_ascii_case("none") {
                    self.filter = None;
                } else {
                    let fam: FilterFamily =
                        v.parse().map_err(|_| Error::config(k, format!("unknown family `{v}`")))?;
                    self.filter.get_or_insert_with(filter).family = fam;
                }
            }
            "filter.stop1" | "filter.pass1" | "filter.pass2" | "filter.stop2" | "filter.atten1"
            | "filter.atten2" | "filter.ripple" => {
                let x: f64 = parse(k, v)?;
                let f = self.filter.get_or_insert_with(filter);
                match k {
                    "filter.stop1" => f.stopband1_hz = x,
                    "filter.pass1" => f.passband1_hz = x,
                    "filter.pass2" => f.passband2_hz = x,
                    "filter.stop2" => f.stopband2_hz = x,
                    "filter.atten1" => f.stop_atten1_db = x,
                    "filter.atten2" => f.stop_atten2_db = x,
                    _ => f.passband_ripple_db = x,
                }
            }
            "filter.max_fir_order" => self.filter.get_or_insert_with(filter).max_fir_order = parse(k, v)?,
            "artifact.method" => {
                self.artifact.method = match v.to_ascii_lowercase().as_str() {
                    "none" => ArtifactMethod::None,
                    "amuse" => ArtifactMethod::Amuse,
                    "fastica" | "ica" => ArtifactMethod::FastIca,
                    _ => return Err(Error::config(k, format!("unknown method `{v}`"))),
                }
            }
            "artifact.keep" => {
                self.artifact.keep = if v.eq_ignore_ascii_case("all") || v.eq_ignore_ascii_case("none") {
                    None
                } else {
                    Some(v.parse().map_err(|e: Error| Error::config(k, e.to_string()))?)
                }
            }
            "artifact.n_comp" => self.artifact.n_comp = parse_opt(k, v)?,
            "artifact.max_iter" => self.artifact.max_iter = parse(k, v)?,
            "artifact.tol" => self.artifact.tol = parse(k, v)?,
            "features.method" => {
                self.features.method = match v.to_ascii_lowercase().as_str() {
                    "periodogram" => FeatureMethod::Periodogram,
                    "welch" | "pwelch" => FeatureMethod::Welch,
                    "goertzel" => FeatureMethod::Goertzel,
                    "yule_ar" | "yulear" | "ar" => FeatureMethod::YuleAr,
                    "stft" => FeatureMethod::Stft,
                    "dwt" => FeatureMethod::Dwt,
                    _ => return Err(Error::config(k, format!("unknown method `{v}`"))),
                }
            }
            "features.nfft" => self.features.nfft = parse(k, v)?,
            "features.segment_len" => self.features.segment_len = parse(k, v)?,
            "features.overlap" => self.features.overlap = parse(k, v)?,
            "features.window" => {
                self.features.window = v.parse().map_err(|_| Error::config(k, format!("unknown window `{v}`")))?
            }
            "features.hop" => self.features.hop = parse_opt(k, v)?,
            "features.ar_order" => self.features.ar_order = parse(k, v)?,
            "features.levels" => self.features.levels = parse(k, v)?,
            "features.freq_range" => self.features.freq_range = parse_range(k, v)?,
            "features.harmonics" => self.features.harmonics = parse(k, v)?,
            "select.method" => {
                let m = v.to_ascii_lowercase();
                if !matches!(m.as_str(), "none" | "pca" | "svd") {
                    Criterion::parse(&m, 1.0, 1.0).map_err(|_| Error::config(k, format!("unknown method `{v}`")))?;
                }
                self.selection.method = m;
            }
            "select.d" => self.selection.d = parse(k, v)?,
            "select.beta" => self.selection.beta = parse(k, v)?,
            "select.gamma" => self.selection.gamma = parse(k, v)?,
            "select.bins" => self.selection.bins = parse(k, v)?,
            "clf.method" => {
                let m = v.to_ascii_lowercase();
                ClassifierSpec::from_str(&m).map_err(|_| Error::config(k, format!("unknown method `{v}`")))?;
                self.classifier.method = m;
            }
            "clf.kernel" => {
                self.classifier.kernel = v.parse().map_err(|_| Error::config(k, format!("unknown kernel `{v}`")))?
            }
            "clf.C" | "clf.c" => self.classifier.c = parse(k, v)?,
            "clf.gamma" => self.classifier.gamma = parse_opt(k, v)?,
            "clf.p" => self.classifier.p = parse(k, v)?,
            "clf.k" => self.classifier.k = parse(k, v)?,
            "clf.n_learners" => self.classifier.n_learners = parse(k, v)?,
            "clf.max_depth" => self.classifier.max_depth = parse_opt(k, v)?,
            "clf.seed" => self.classifier.seed = parse_opt(k, v)?,
            _ => return Err(Error::config(k, "unknown key")),
        }
        Ok(())
    }

    /// Applies every setting in `text` (`#` starts a comment). A `preset`
    /// line, if present, must come first and replaces `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}", no + 1), format!("expected key = value, got `{line}`"))
            })?;
            if k.trim() == "preset" {
                *self = PipelineConfig::preset(v)?;
            } else {
                self.set(k, v)?;
            }
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<PipelineConfig> {
        let mut c = PipelineConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    /// Every setting as `key = value` lines; `from_text` inverts it.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("channel", self.channel.to_string());
        put("duration", fmt_opt(&self.duration_s));
        put("zero_mean", self.zero_mean.to_string());
        put("seed", self.seed.to_string());
        put(
            "exclude",
            self.exclude
                .iter()
                .map(|(s, sess)| match sess {
                    Some(x) => format!("{s}:{x}"),
                    None => s.to_string(),
                })
                .collect::<Vec<_>>()
                .join(","),
        );
        match &self.filter {
            None => put("filter.family", "none".into()),
            Some(f) => {
                put("filter.family", f.family.to_string());
                put("filter.stop1", f.stopband1_hz.to_string());
                put("filter.pass1", f.passband1_hz.to_string());
                put("filter.pass2", f.passband2_hz.to_string());
                put("filter.stop2", f.stopband2_hz.to_string());
                put("filter.atten1", f.stop_atten1_db.to_string());
                put("filter.atten2", f.stop_atten2_db.to_string());
                put("filter.ripple", f.passband_ripple_db.to_string());
                put("filter.max_fir_order", f.max_fir_order.to_string());
            }
        }
        let a = &self.artifact;
        put(
            "artifact.method",
            match a.method {
                ArtifactMethod::None => "none",
                ArtifactMethod::Amuse => "amuse",
                ArtifactMethod::FastIca => "fastica",
            }
            .into(),
        );
        put("artifact.keep", a.keep.map_or_else(|| "all".into(), |k| k.to_string()));
        put("artifact.n_comp", fmt_opt(&a.n_comp));
        put("artifact.max_iter", a.max_iter.to_string());
        put("artifact.tol", a.tol.to_string());
        let f = &self.features;
        put(
            "features.method",
            match f.method {
                FeatureMethod::Periodogram => "periodogram",
                FeatureMethod::Welch => "welch",
                FeatureMethod::Goertzel => "goertzel",
                FeatureMethod::YuleAr => "yule_ar",
                FeatureMethod::Stft => "stft",
                FeatureMethod::Dwt => "dwt",
            }
            .into(),
        );
        put("features.nfft", f.nfft.to_string());
        put("features.segment_len", f.segment_len.to_string());
        put("features.overlap", f.overlap.to_string());
        put("features.window", f.window.to_string());
        put("features.hop", fmt_opt(&f.hop));
        put("features.ar_order", f.ar_order.to_string());
        put("features.levels", f.levels.to_string());
        put("features.freq_range", format!("{}..{}", f.freq_range.lo, f.freq_range.hi));
        put("features.harmonics", f.harmonics.to_string());
        let sel = &self.selection;
        put("select.method", sel.method.clone());
        put("select.d", sel.d.to_string());
        put("select.beta", sel.beta.to_string());
        put("select.gamma", sel.gamma.to_string());
        put("select.bins", sel.bins.to_string());
        let c = &self.classifier;
        put("clf.method", c.method.clone());
        put("clf.kernel", c.kernel.to_string());
        put("clf.C", c.c.to_string());
        put("clf.gamma", fmt_opt(&c.gamma));
        put("clf.p", c.p.to_string());
        put("clf.k", c.k.to_string());
        put("clf.n_learners", c.n_learners.to_string());
        put("clf.max_depth", fmt_opt(&c.max_depth));
        put("clf.seed", fmt_opt(&c.seed));
        s
    }

    /// 0-based channel index.
    pub fn channel_index(&self) -> Result<usize> {
        self.channel
            .checked_sub(1)
            .ok_or_else(|| Error::config("channel", "channels are numbered from 1"))
    }

    pub fn extractor(&self, stimuli: &[f64]) -> FeatureExtractor {
        let f = &self.features;
        match f.method {
            FeatureMethod::Periodogram => FeatureExtractor::Periodogram {
                nfft: f.nfft,
                range: f.freq_range,
            },
            FeatureMethod::Welch => FeatureExtractor::Welch {
                params: WelchParams {
                    segment_len: f.segment_len,
                    overlap: f.overlap,
                    nfft: f.nfft,
                    window: f.window,
                },
                range: f.freq_range,
            },
            FeatureMethod::Goertzel => FeatureExtractor::Goertzel {
                targets: harmonic_targets(stimuli, f.harmonics),
            },
            FeatureMethod::YuleAr => FeatureExtractor::YuleAr {
                order: f.ar_order,
                nfft: f.nfft,
                range: f.freq_range,
            },
            FeatureMethod::Stft => FeatureExtractor::Stft {
                window: f.window,
                window_len: f.segment_len,
                hop: f.hop.unwrap_or((f.segment_len / 2).max(1)),
                nfft: f.nfft,
                range: f.freq_range,
            },
            FeatureMethod::Dwt => FeatureExtractor::Dwt { levels: f.levels },
        }
    }

    pub fn selector(&self) -> Result<FeatureSelector> {
        let s = &self.selection;
        Ok(match s.method.as_str() {
            "none" => FeatureSelector::None,
            "pca" => FeatureSelector::Pca { d: s.d },
            "svd" => FeatureSelector::Svd { d: s.d },
            name => FeatureSelector::Feast {
                criterion: Criterion::parse(name, s.beta, s.gamma)
                    .map_err(|e| Error::config("select.method", e.to_string()))?,
                d: s.d,
                bins: s.bins,
            },
        })
    }

    pub fn classifier_spec(&self) -> Result<ClassifierSpec> {
        let c = &self.classifier;
        let seed = c.seed.unwrap_or(self.seed);
        let spec = match c.method.as_str() {
            "svm" => ClassifierSpec::Svm {
                kernel: KernelSpec {
                    kind: c.kernel,
                    gamma: c.gamma,
                    p: c.p,
                },
                params: SvmParams {
                    c: c.c,
                    ..SvmParams::default()
                },
            },
            "knn" => ClassifierSpec::Knn { k: c.k },
            "tree" => ClassifierSpec::Tree {
                params: TreeParams {
                    max_depth: c.max_depth,
                    min_leaf: 1,
                },
            },
            "adaboost" | "boost" => ClassifierSpec::AdaBoost {
                params: AdaBoostParams {
                    n_rounds: c.n_learners,
                    max_depth: c.max_depth.unwrap_or(1),
                    seed,
                    ..AdaBoostParams::default()
                },
            },
            "bagging" | "bag" => ClassifierSpec::Bagging {
                params: BaggingParams {
                    n_learners: c.n_learners,
                    seed,
                    tree: TreeParams {
                        max_depth: c.max_depth,
                        min_leaf: 1,
                    },
                },
            },
            other => other
                .parse()
                .map_err(|e: Error| Error::config("clf.method", e.to_string()))?,
        };
        Ok(spec)
    }

    /// Number of samples each trial contributes at `fs`.
    pub fn trial_len(&self, n_samples: usize, fs: f64) -> Result<usize> {
        match self.duration_s {
            None => Ok(n_samples),
            Some(d) => {
                let n = (d * fs).round();
                if !(n >= 1.0) || n as usize > n_samples {
                    return Err(Error::config(
                        "duration",
                        format!("{d} s does not fit trials of {n_samples} samples"),
                    ));
                }
                Ok(n as usize)
            }
        }
    }

    /// Checks channel, duration, filter and artifact settings against the
    /// dataset shape and returns the samples used per trial.
    pub fn validate_signal_stages(&self, ds: &Dataset) -> Result<usize> {
        let ch = self.channel_index()?;
        if ch >= ds.channel_count() {
            return Err(Error::config(
                "channel",
                format!("channel {} exceeds the {} available", self.channel, ds.channel_count()),
            ));
        }
        let fs = ds.sample_rate();
        let n = match ds.trials().iter().map(|t| t.n_samples()).min() {
            Some(shortest) => self.trial_len(shortest, fs)?,
            None => return Ok(0),
        };
        if let Some(f) = &self.filter {
            f.validate(fs).map_err(|e| Error::config("filter", e.to_string()))?;
        }
        if self.artifact.method != ArtifactMethod::None {
            let n_comp = match self.artifact.method {
                ArtifactMethod::FastIca => self.artifact.n_comp.unwrap_or(ds.channel_count()),
                _ => ds.channel_count(),
            };
            if n_comp == 0 || n_comp > ds.channel_count() {
                return Err(Error::config("artifact.n_comp", format!("must be in 1..={}", ds.channel_count())));
            }
            if n <= ds.channel_count() {
                return Err(Error::config(
                    "artifact.method",
                    format!("{n} samples per trial do not exceed {} channels", ds.channel_count()),
                ));
            }
            if let Some(k) = self.artifact.keep {
                k.indices(n_comp).map_err(|e| Error::config("artifact.keep", e.to_string()))?;
            }
        }
        Ok(n)
    }

    /// Checks every stage against the dataset shape; errors name the
    /// offending key.
    pub fn validate_for(&self, ds: &Dataset) -> Result<()> {
        let n = self.validate_signal_stages(ds)?;
        if ds.is_empty() {
            return Ok(());
        }
        let fs = ds.sample_rate();
        let nf = self
            .extractor(ds.stimulus_frequencies())
            .n_features(n, fs)
            .map_err(|e| match e {
                Error::InvalidParameter { name, reason } => Error::config(format!("features.{name}"), reason),
                other => Error::config("features", other.to_string()),
            })?;
        if nf == 0 {
            return Err(Error::config("features.freq_range", "selects no features"));
        }
        if self.selection.method != "none" && (self.selection.d == 0 || self.selection.d > nf) {
            return Err(Error::config(
                "select.d",
                format!("{} must be in 1..={nf} (feature count)", self.selection.d),
            ));
        }
        if self.selection.method != "none" && self.selection.method != "pca" && self.selection.method != "svd" && self.selection.bins < 2 {
            return Err(Error::config("select.bins", "need at least 2 bins"));
        }
        self.selector()?;
        let spec = self.classifier_spec()?;
        if let ClassifierSpec::Svm { kernel, params } = &spec {
            kernel.validate().map_err(|e| Error::config("clf.gamma", e.to_string()))?;
            if !(params.c > 0.0) {
                return Err(Error::config("clf.C", "must be positive"));
            }
        }
        if let ClassifierSpec::Knn { k } = spec {
            if k == 0 {
                return Err(Error::config("clf.k", "must be at least 1"));
            }
        }
        Ok(())
    }

    /// Short human-readable summary of the stage choices.
    pub fn summary(&self) -> String {
        format!(
            "ch{} | {} | {} | {} | {} | {}",
            self.channel,
            self.filter.as_ref().map_or("no filter".into(), |f| f.family.to_string()),
            match self.artifact.method {
                ArtifactMethod::None => "no bss".to_string(),
                ArtifactMethod::Amuse => format!("amuse keep {}", fmt_keep(&self.artifact.keep)),
                ArtifactMethod::FastIca => format!("fastica keep {}", fmt_keep(&self.artifact.keep)),
            },
            self.extractor(&[]).name(),
            self.selection.method,
            self.classifier_spec().map_or_else(|_| self.classifier.method.clone(), |c| c.name()),
        )
    }
}

fn fmt_keep(k: &Option<KeepRange>) -> String {
    k.map_or_else(|| "all".into(), |k| k.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_through_text() {
        for name in PRESETS {
            let c = PipelineConfig::preset(name).unwrap();
            assert_eq!(PipelineConfig::from_text(&c.to_text()).unwrap(), c, "{name}");
        }
        let mut c = PipelineConfig::default();
        c.exclude = vec![(1, Some(2)), (4, None)];
        c.duration_s = Some(3.0);
        c.filter = None;
        c.classifier.gamma = Some(0.25);
        c.features.freq_range = FreqRange::new(5.0, 40.0);
        assert_eq!(PipelineConfig::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn optimal_preset_contents() {
        let c = PipelineConfig::preset("optimal").unwrap();
        assert_eq!(c.channel, 138);
        assert_eq!(c.filter.as_ref().unwrap().family, FilterFamily::IirElliptic);
        // drop the first 15 and the last 4 of 256 components
        let keep = c.artifact.keep.unwrap().indices(256).unwrap();
        assert_eq!((keep[0], *keep.last().unwrap(), keep.len()), (15, 251, 237));
        assert_eq!((c.features.nfft, c.features.segment_len, c.features.overlap), (512, 350, 0.75));
        assert_eq!(c.selector().unwrap(), FeatureSelector::Svd { d: 90 });
        assert!(matches!(
            c.classifier_spec().unwrap(),
            ClassifierSpec::Svm { kernel: KernelSpec { kind: KernelKind::Spearman, .. }, .. }
        ));
        let d = PipelineConfig::preset("default").unwrap();
        assert_eq!(d.channel, 126);
        assert_eq!(d.classifier_spec().unwrap(), ClassifierSpec::default());
    }

    #[test]
    fn overlay_and_errors() {
        let c = PipelineConfig::from_text("preset = optimal\nchannel = 3 # comment\nselect.d = 20\n").unwrap();
        assert_eq!((c.channel, c.selection.d), (3, 20));
        assert_eq!(c.artifact.method, ArtifactMethod::Amuse);
        match PipelineConfig::from_text("bogus.key = 1") {
            Err(Error::Config { key, .. }) => assert_eq!(key, "bogus.key"),
            other => panic!("{other:?}"),
        }
        assert!(PipelineConfig::from_text("clf.kernel = poly").is_err());
        assert!(PipelineConfig::from_text("just words").is_err());
        let c = PipelineConfig::from_text("exclude = [3:1, 7]").unwrap();
        assert_eq!(c.exclude, vec![(3, Some(1)), (7, None)]);
    }
}
