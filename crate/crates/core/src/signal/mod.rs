//! Trials, datasets, ingestion and synthetic SSVEP generation.

mod io;
mod synth;

pub use io::{load_dataset, save_dataset, DatasetFormat, LoadOptions};
pub use synth::{synthesize, DatasetParams, SynthSpec};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Stimulus frequencies (Hz) used by the reference acquisition protocol.
pub const DEFAULT_STIMULUS_FREQUENCIES: [f64; 5] = [6.66, 7.50, 8.57, 10.00, 12.00];
pub const DEFAULT_SAMPLE_RATE: f64 = 250.0;
pub const DEFAULT_TRIAL_DURATION_S: f64 = 5.0;

/// Two stimulus frequencies closer than this are the same label.
const LABEL_TOLERANCE_HZ: f64 = 1e-6;

/// One stimulus presentation: a channel-major sample matrix in microvolts
/// plus its stimulus label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    samples: Vec<f64>,
    n_channels: usize,
    n_samples: usize,
    label: f64,
    subject_id: u16,
    session_id: u16,
    sample_rate: f64,
}

impl Trial {
    /// `samples` is channel-major: channel `c` occupies
    /// `samples[c * n_samples..(c + 1) * n_samples]`.
    pub fn new(
        samples: Vec<f64>,
        n_channels: usize,
        label: f64,
        subject_id: u16,
        session_id: u16,
        sample_rate: f64,
    ) -> Result<Self> {
        if n_channels == 0 {
            return Err(Error::param("n_channels", "must be positive"));
        }
        if samples.len() % n_channels != 0 {
            return Err(Error::DimensionMismatch {
                expected: n_channels * (samples.len() / n_channels + 1),
                actual: samples.len(),
            });
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::param("sample_rate", "must be positive and finite"));
        }
        if !label.is_finite() {
            return Err(Error::param("label", "must be finite"));
        }
        if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(
                "samples",
                format!("non-finite value at flat index {pos}"),
            ));
        }
        let n_samples = samples.len() / n_channels;
        Ok(Trial {
            samples,
            n_channels,
            n_samples,
            label,
            subject_id,
            session_id,
            sample_rate,
        })
    }

    /// Builds a trial from per-channel rows.
    pub fn from_channels(
        channels: &[Vec<f64>],
        label: f64,
        subject_id: u16,
        session_id: u16,
        sample_rate: f64,
    ) -> Result<Self> {
        let n = channels.first().map_or(0, Vec::len);
        if let Some(bad) = channels.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: bad.len(),
            });
        }
        let flat = channels.iter().flatten().copied().collect();
        Trial::new(
            flat,
            channels.len(),
            label,
            subject_id,
            session_id,
            sample_rate,
        )
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn label(&self) -> f64 {
        self.label
    }

    pub fn subject_id(&self) -> u16 {
        self.subject_id
    }

    pub fn session_id(&self) -> u16 {
        self.session_id
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples as f64 / self.sample_rate
    }

    /// Channel-major sample storage.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Borrowed view of one channel.
    pub fn channel(&self, channel: usize) -> Result<&[f64]> {
        if channel >= self.n_channels {
            return Err(Error::IndexOutOfRange {
                index: channel,
                len: self.n_channels,
            });
        }
        Ok(&self.samples[channel * self.n_samples..(channel + 1) * self.n_samples])
    }

    /// Per-channel rows, in channel order.
    pub fn channels(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks_exact(self.n_samples.max(1))
    }
}

/// Copies out the single-channel sample sequence of `trial`.
pub fn select_channel(trial: &Trial, channel: usize) -> Result<Vec<f64>> {
    trial.channel(channel).map(<[f64]>::to_vec)
}

/// An ordered collection of trials sharing sample rate and montage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    trials: Vec<Trial>,
    stimulus_frequencies: Vec<f64>,
    channel_count: usize,
    sample_rate: f64,
}

impl Dataset {
    pub fn new(
        trials: Vec<Trial>,
        stimulus_frequencies: Vec<f64>,
        channel_count: usize,
        sample_rate: f64,
    ) -> Result<Self> {
        if channel_count == 0 {
            return Err(Error::param("channel_count", "must be positive"));
        }
        if stimulus_frequencies.is_empty() {
            return Err(Error::param("stimulus_frequencies", "must not be empty"));
        }
        if stimulus_frequencies.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::param(
                "stimulus_frequencies",
                "must be finite and non-negative",
            ));
        }
        for (i, a) in stimulus_frequencies.iter().enumerate() {
            if stimulus_frequencies[..i]
                .iter()
                .any(|b| (a - b).abs() <= LABEL_TOLERANCE_HZ)
            {
                return Err(Error::param(
                    "stimulus_frequencies",
                    format!("duplicate frequency {a}"),
                ));
            }
        }
        let ds = Dataset {
            trials: Vec::new(),
            stimulus_frequencies,
            channel_count,
            sample_rate,
        };
        for (index, t) in trials.iter().enumerate() {
            ds.check_trial(index, t)?;
        }
        Ok(Dataset { trials, ..ds })
    }

    fn check_trial(&self, index: usize, t: &Trial) -> Result<()> {
        if t.n_channels != self.channel_count {
            return Err(Error::InvalidTrial {
                index,
                reason: format!(
                    "has {} channels, dataset declares {}",
                    t.n_channels, self.channel_count
                ),
            });
        }
        if t.sample_rate != self.sample_rate {
            return Err(Error::InvalidTrial {
                index,
                reason: format!(
                    "sample rate {} differs from dataset rate {}",
                    t.sample_rate, self.sample_rate
                ),
            });
        }
        if self.label_index(t.label).is_none() {
            return Err(Error::InvalidTrial {
                index,
                reason: format!("label {} Hz is not a declared stimulus frequency", t.label),
            });
        }
        Ok(())
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn stimulus_frequencies(&self) -> &[f64] {
        &self.stimulus_frequencies
    }

    pub fn channel_count(&self) -> usize {
        self.channel_count
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Position of `label` in the stimulus set.
    pub fn label_index(&self, label: f64) -> Option<usize> {
        self.stimulus_frequencies
            .iter()
            .position(|f| (f - label).abs() <= LABEL_TOLERANCE_HZ)
    }

    /// Class index of every trial, in trial order.
    pub fn class_indices(&self) -> Vec<usize> {
        self.trials
            .iter()
            .map(|t| self.label_index(t.label).expect("labels validated on construction"))
            .collect()
    }

    /// Distinct subject ids in ascending order.
    pub fn subjects(&self) -> Vec<u16> {
        let mut s: Vec<u16> = self.trials.iter().map(|t| t.subject_id).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Same dataset restricted to the given trial positions.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            trials: indices.iter().map(|&i| self.trials[i].clone()).collect(),
            stimulus_frequencies: self.stimulus_frequencies.clone(),
            channel_count: self.channel_count,
            sample_rate: self.sample_rate,
        }
    }

    /// Drops every trial matching one of the `(subject, session)` pairs;
    /// `None` as session excludes the whole subject.
    pub fn excluding(&self, exclude: &[(u16, Option<u16>)]) -> Dataset {
        let keep: Vec<usize> = self
            .trials
            .iter()
            .enumerate()
            .filter(|(_, t)| {
                !exclude
                    .iter()
                    .any(|&(s, sess)| t.subject_id == s && sess.is_none_or(|x| x == t.session_id))
            })
            .map(|(i, _)| i)
            .collect();
        self.subset(&keep)
    }
}
