//! Spectral and time-frequency feature extractors mapping a single-channel
//! trial to a fixed-length feature vector.

mod ar;
mod dwt;
mod spectral;

pub use ar::{yule_ar_coefficients, yule_ar_psd};
pub use dwt::{dwt, dwt_len, idwt, WaveletCoefficients};
pub use spectral::{goertzel, periodogram, periodogram_two_sided, stft, welch, WelchParams, Window};

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::{Error, Result};

/// Inclusive frequency interval in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreqRange {
    pub lo: f64,
    pub hi: f64,
}

impl FreqRange {
    pub fn new(lo: f64, hi: f64) -> Self {
        FreqRange { lo, hi }
    }

    pub fn full() -> Self {
        FreqRange {
            lo: 0.0,
            hi: f64::INFINITY,
        }
    }

    pub fn contains(&self, f: f64) -> bool {
        let tol = 1e-9 * (1.0 + f.abs());
        f >= self.lo - tol && f <= self.hi + tol
    }
}

impl Default for FreqRange {
    fn default() -> Self {
        FreqRange::new(0.0, 125.0)
    }
}

/// Power estimates on a frequency axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub freq_axis: Vec<f64>,
    pub method: String,
    pub params: String,
}

impl Spectrum {
    pub fn new(
        values: Vec<f64>,
        freq_axis: Vec<f64>,
        method: &str,
        params: String,
    ) -> Spectrum {
        Spectrum {
            values,
            freq_axis,
            method: method.into(),
            params,
        }
    }

    /// Keeps the bins whose frequency lies in `range`.
    pub fn restrict(self, range: FreqRange) -> Result<Spectrum> {
        if range.lo > range.hi || range.lo.is_nan() || range.hi.is_nan() {
            return Err(Error::param("freq_range", "lower bound exceeds upper bound"));
        }
        let (values, freq_axis): (Vec<f64>, Vec<f64>) = self
            .values
            .iter()
            .zip(&self.freq_axis)
            .filter(|(_, &f)| range.contains(f))
            .map(|(&v, &f)| (v, f))
            .unzip();
        if values.is_empty() {
            return Err(Error::param("freq_range", "selects no frequency bins"));
        }
        Ok(Spectrum {
            values,
            freq_axis,
            ..self
        })
    }

    /// Index and value of the largest bin; ties go to the lowest index.
    pub fn argmax(&self) -> Option<(usize, f64)> {
        self.values.iter().enumerate().fold(None, |best, (i, &v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((i, v)),
        })
    }
}

/// `|S[m, f]|^2` with frames as rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    pub values: Matrix,
    pub time_axis: Vec<f64>,
    pub freq_axis: Vec<f64>,
}

impl Spectrogram {
    /// Time-major flattening restricted to `range`.
    pub fn flatten(&self, range: FreqRange) -> Vec<f64> {
        let keep: Vec<usize> = self
            .freq_axis
            .iter()
            .enumerate()
            .filter(|(_, &f)| range.contains(f))
            .map(|(i, _)| i)
            .collect();
        self.values
            .rows()
            .flat_map(|r| keep.iter().map(move |&k| r[k]))
            .collect()
    }
}

/// Number of harmonics used by the default Goertzel target set.
pub const DEFAULT_GOERTZEL_HARMONICS: usize = 4;

/// Stimulus frequencies times harmonics `1..=harmonics`, grouped by
/// harmonic.
pub fn harmonic_targets(stimuli: &[f64], harmonics: usize) -> Vec<f64> {
    (1..=harmonics)
        .flat_map(|h| stimuli.iter().map(move |f| f * h as f64))
        .collect()
}

/// A configured feature extractor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum FeatureExtractor {
    /// When `nfft` is shorter than the trial, the next multiple of `nfft`
    /// that covers it is used instead.
    Periodogram { nfft: usize, range: FreqRange },
    Welch { params: WelchParams, range: FreqRange },
    Goertzel { targets: Vec<f64> },
    YuleAr { order: usize, nfft: usize, range: FreqRange },
    Stft {
        window: Window,
        window_len: usize,
        hop: usize,
        nfft: usize,
        range: FreqRange,
    },
    Dwt { levels: usize },
}

impl Default for FeatureExtractor {
    fn default() -> Self {
        FeatureExtractor::Welch {
            params: WelchParams::default(),
            range: FreqRange::default(),
        }
    }
}

impl FeatureExtractor {
    pub fn name(&self) -> &'static str {
        match self {
            FeatureExtractor::Periodogram { .. } => "periodogram",
            FeatureExtractor::Welch { .. } => "welch",
            FeatureExtractor::Goertzel { .. } => "goertzel",
            FeatureExtractor::YuleAr { .. } => "yule_ar",
            FeatureExtractor::Stft { .. } => "stft",
            FeatureExtractor::Dwt { .. } => "dwt",
        }
    }

    fn periodogram_nfft(nfft: usize, n: usize) -> usize {
        if nfft >= n || nfft == 0 {
            nfft
        } else {
            n.div_ceil(nfft) * nfft
        }
    }

    /// Feature vector of one single-channel trial.
    pub fn extract(&self, x: &[f64], fs: f64) -> Result<Vec<f64>> {
        Ok(match self {
            FeatureExtractor::Periodogram { nfft, range } => {
                periodogram(x, fs, Self::periodogram_nfft(*nfft, x.len()), *range)?.values
            }
            FeatureExtractor::Welch { params, range } => welch(x, fs, params, *range)?.values,
            FeatureExtractor::Goertzel { targets } => goertzel(x, fs, targets)?.values,
            FeatureExtractor::YuleAr { order, nfft, range } => {
                yule_ar_psd(x, fs, *order, *nfft, *range)?.values
            }
            FeatureExtractor::Stft {
                window,
                window_len,
                hop,
                nfft,
                range,
            } => stft(x, fs, *window, *window_len, *hop, *nfft)?.flatten(*range),
            FeatureExtractor::Dwt { levels } => dwt(x, "haar", *levels)?.to_vec(),
        })
    }

    /// Feature count for trials of `n` samples; depends only on parameters.
    pub fn n_features(&self, n: usize, fs: f64) -> Result<usize> {
        let bins_in = |nfft: usize, range: &FreqRange| {
            (0..=nfft / 2)
                .filter(|&k| range.contains(k as f64 * fs / nfft as f64))
                .count()
        };
        Ok(match self {
            FeatureExtractor::Periodogram { nfft, range } => {
                bins_in(Self::periodogram_nfft(*nfft, n), range)
            }
            FeatureExtractor::Welch { params, range } => {
                params.validate(n)?;
                bins_in(params.nfft, range)
            }
            FeatureExtractor::Goertzel { targets } => targets.len(),
            FeatureExtractor::YuleAr { nfft, range, .. } => bins_in(*nfft, range),
            FeatureExtractor::Stft {
                window_len,
                hop,
                nfft,
                range,
                ..
            } => {
                if *window_len == 0 || *window_len > n || *hop == 0 {
                    return Err(Error::param("window_len", "does not fit the trial"));
                }
                ((n - window_len) / hop + 1) * bins_in(*nfft, range)
            }
            FeatureExtractor::Dwt { levels } => dwt_len(n, *levels),
        })
    }
}
