//! Synthetic SSVEP generator.
//!
//! Each channel is `g_c * s(t) + sigma_n * pink_c(t) + h_c * blink(t)` where
//! `s(t) = sum_h (A / h) sin(2 pi h f t + phi_h)`. `g_c` peaks at 1 on the
//! SSVEP channel and `sigma_n` is set so that on that channel the ratio of
//! expected signal power `sum_h a_h^2 / 2` to noise variance equals the
//! requested SNR. Blinks are Gaussian bumps shared by every channel with a
//! front-to-back decaying gain `h_c`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{Dataset, Trial, DEFAULT_SAMPLE_RATE, DEFAULT_STIMULUS_FREQUENCIES, DEFAULT_TRIAL_DURATION_S};
use crate::{Error, Result};

/// Width (standard deviation, seconds) of a blink bump; its spectrum is
/// negligible above 10 Hz.
const BLINK_WIDTH_S: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_subjects: usize,
    pub n_trials_per_freq: usize,
    /// One value per subject, or a single value applied to all.
    pub snr_db: Vec<f64>,
    pub n_harmonics: usize,
    /// Expected blink transients per second.
    pub blink_rate: f64,
    pub seed: u64,
    pub channel_count: usize,
    /// Channel (0-based) where the SSVEP response is strongest.
    pub ssvep_channel: usize,
    /// Fundamental amplitude `A` in microvolts.
    pub amplitude_uv: f64,
    pub blink_amplitude_uv: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_subjects: 4,
            n_trials_per_freq: 5,
            snr_db: vec![0.0],
            n_harmonics: 2,
            blink_rate: 0.0,
            seed: 0,
            channel_count: 8,
            ssvep_channel: 0,
            amplitude_uv: 2.0,
            blink_amplitude_uv: 50.0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 || self.n_subjects > u16::MAX as usize {
            return Err(Error::param("n_subjects", "must be in 1..=65535"));
        }
        if self.n_harmonics == 0 {
            return Err(Error::param("n_harmonics", "must be at least 1"));
        }
        if self.snr_db.is_empty() {
            return Err(Error::param("snr_db", "must not be empty"));
        }
        if self.snr_db.len() != 1 && self.snr_db.len() != self.n_subjects {
            return Err(Error::param(
                "snr_db",
                format!(
                    "needs 1 or {} values, got {}",
                    self.n_subjects,
                    self.snr_db.len()
                ),
            ));
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::param("snr_db", "must be finite"));
        }
        if !(self.blink_rate.is_finite() && self.blink_rate >= 0.0) {
            return Err(Error::param("blink_rate", "must be finite and non-negative"));
        }
        if self.channel_count == 0 {
            return Err(Error::param("channel_count", "must be positive"));
        }
        if self.ssvep_channel >= self.channel_count {
            return Err(Error::param("ssvep_channel", "must be below channel_count"));
        }
        if !(self.amplitude_uv.is_finite() && self.amplitude_uv > 0.0) {
            return Err(Error::param("amplitude_uv", "must be positive"));
        }
        if !self.blink_amplitude_uv.is_finite() {
            return Err(Error::param("blink_amplitude_uv", "must be finite"));
        }
        Ok(())
    }

    pub fn subject_snr(&self, subject_index: usize) -> f64 {
        if self.snr_db.len() == 1 {
            self.snr_db[0]
        } else {
            self.snr_db[subject_index]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetParams {
    pub stimulus_frequencies: Vec<f64>,
    pub sample_rate: f64,
    pub duration_s: f64,
}

impl Default for DatasetParams {
    fn default() -> Self {
        DatasetParams {
            stimulus_frequencies: DEFAULT_STIMULUS_FREQUENCIES.to_vec(),
            sample_rate: DEFAULT_SAMPLE_RATE,
            duration_s: DEFAULT_TRIAL_DURATION_S,
        }
    }
}

/// Generates `n_subjects * n_trials_per_freq * n_freqs` trials ordered by
/// subject, then repetition, then stimulus frequency. Every trial draws from
/// its own ChaCha stream, so output depends only on `(spec, params)`.
pub fn synthesize(spec: &SynthSpec, params: &DatasetParams) -> Result<Dataset> {
    spec.validate()?;
    let n = params.duration_s * params.sample_rate;
    if !(n.is_finite() && n >= 2.0) || (n - n.round()).abs() > 1e-9 {
        return Err(Error::param(
            "duration_s",
            "duration * sample_rate must be a whole number of at least 2 samples",
        ));
    }
    let n = n.round() as usize;
    let fs = params.sample_rate;
    let c_count = spec.channel_count;

    let spread = (c_count as f64 / 4.0).max(1.0);
    let ssvep_gain: Vec<f64> = (0..c_count)
        .map(|c| {
            let d = c as f64 - spec.ssvep_channel as f64;
            (-d * d / (2.0 * spread * spread)).exp()
        })
        .collect();
    let blink_gain: Vec<f64> = (0..c_count)
        .map(|c| {
            if c_count == 1 {
                1.0
            } else {
                1.0 - 0.8 * c as f64 / (c_count - 1) as f64
            }
        })
        .collect();
    let amps: Vec<f64> = (1..=spec.n_harmonics)
        .map(|h| spec.amplitude_uv / h as f64)
        .collect();
    let signal_power: f64 = amps.iter().map(|a| a * a / 2.0).sum();

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    let mut trials = Vec::new();
    let mut stream = 0u64;
    for s in 0..spec.n_subjects {
        let noise_std = (signal_power / 10f64.powf(spec.subject_snr(s) / 10.0)).sqrt();
        for _rep in 0..spec.n_trials_per_freq {
            for &f in &params.stimulus_frequencies {
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                rng.set_stream(stream);
                stream += 1;

                let phases: Vec<f64> = amps.iter().map(|_| rng.random::<f64>() * 2.0 * PI).collect();
                let ssvep: Vec<f64> = (0..n)
                    .map(|i| {
                        let t = i as f64 / fs;
                        amps.iter()
                            .zip(&phases)
                            .enumerate()
                            .map(|(k, (a, p))| a * (2.0 * PI * (k + 1) as f64 * f * t + p).sin())
                            .sum()
                    })
                    .collect();
                let blink = blink_train(&mut rng, spec, n, fs)?;

                let mut samples = Vec::with_capacity(c_count * n);
                for c in 0..c_count {
                    let noise = pink_noise(&mut rng, n, fwd.as_ref(), inv.as_ref());
                    samples.extend((0..n).map(|i| {
                        ssvep_gain[c] * ssvep[i] + noise_std * noise[i] + blink_gain[c] * blink[i]
                    }));
                }
                trials.push(Trial::new(samples, c_count, f, (s + 1) as u16, 1, fs)?);
            }
        }
    }
    Dataset::new(trials, params.stimulus_frequencies.clone(), c_count, fs)
}

fn blink_train(rng: &mut ChaCha8Rng, spec: &SynthSpec, n: usize, fs: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n];
    let lambda = spec.blink_rate * n as f64 / fs;
    if lambda <= 0.0 {
        return Ok(out);
    }
    let count = Poisson::new(lambda)
        .map_err(|e| Error::param("blink_rate", e.to_string()))?
        .sample(rng) as usize;
    for _ in 0..count {
        let centre = rng.random::<f64>() * n as f64 / fs;
        let amp = spec.blink_amplitude_uv * (0.8 + 0.4 * rng.random::<f64>());
        for (i, v) in out.iter_mut().enumerate() {
            let d = (i as f64 / fs - centre) / BLINK_WIDTH_S;
            if d.abs() < 8.0 {
                *v += amp * (-0.5 * d * d).exp();
            }
        }
    }
    Ok(out)
}

/// Unit-variance zero-mean noise with a `1/f` power spectrum, obtained by
/// shaping white Gaussian noise in the frequency domain.
fn pink_noise(
    rng: &mut ChaCha8Rng,
    n: usize,
    fwd: &dyn rustfft::Fft<f64>,
    inv: &dyn rustfft::Fft<f64>,
) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|_| Complex::new(StandardNormal.sample(rng), 0.0))
        .collect();
    fwd.process(&mut buf);
    buf[0] = Complex::new(0.0, 0.0);
    for (k, v) in buf.iter_mut().enumerate().skip(1) {
        // symmetric bin index keeps the output real
        let kk = k.min(n - k) as f64;
        *v /= kk.sqrt();
    }
    inv.process(&mut buf);
    let mut x: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let m = x.iter().sum::<f64>() / n as f64;
    x.iter_mut().for_each(|v| *v -= m);
    let sd = (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if sd > 0.0 {
        x.iter_mut().for_each(|v| *v /= sd);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_given_seed() {
        let spec = SynthSpec {
            n_subjects: 2,
            n_trials_per_freq: 2,
            blink_rate: 0.5,
            seed: 42,
            ..SynthSpec::default()
        };
        let a = synthesize(&spec, &DatasetParams::default()).unwrap();
        let b = synthesize(&spec, &DatasetParams::default()).unwrap();
        assert_eq!(a, b);
        let c = synthesize(&SynthSpec { seed: 43, ..spec }, &DatasetParams::default()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn shape_and_labels() {
        let spec = SynthSpec {
            n_subjects: 3,
            n_trials_per_freq: 2,
            ..SynthSpec::default()
        };
        let ds = synthesize(&spec, &DatasetParams::default()).unwrap();
        assert_eq!(ds.len(), 3 * 2 * 5);
        assert!(ds.trials().iter().all(|t| t.n_samples() == 1250));
        assert_eq!(ds.subjects(), vec![1, 2, 3]);
    }

    #[test]
    fn pink_noise_is_unit_variance_and_1_over_f() {
        let n = 4096;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut low = 0.0;
        let mut high = 0.0;
        for _ in 0..20 {
            let x = pink_noise(&mut rng, n, fwd.as_ref(), inv.as_ref());
            let var = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
            assert!((var - 1.0).abs() < 1e-9);
            let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
            fwd.process(&mut buf);
            low += buf[10..20].iter().map(|c| c.norm_sqr()).sum::<f64>();
            high += buf[100..200].iter().map(|c| c.norm_sqr()).sum::<f64>() / 10.0;
        }
        // 1/f: bins near 15 carry ~10x the power of bins near 150
        let ratio = low / high;
        assert!(ratio > 5.0 && ratio < 20.0, "ratio {ratio}");
    }

    #[test]
    fn snr_sets_noise_power_on_focus_channel() {
        let spec = SynthSpec {
            n_subjects: 1,
            n_trials_per_freq: 1,
            snr_db: vec![0.0],
            n_harmonics: 1,
            channel_count: 1,
            amplitude_uv: 1.0,
            ..SynthSpec::default()
        };
        let ds = synthesize(&spec, &DatasetParams::default()).unwrap();
        for t in ds.trials() {
            let p = t.samples().iter().map(|v| v * v).sum::<f64>() / t.n_samples() as f64;
            // signal 0.5 + noise 0.5, cross term small
            assert!((p - 1.0).abs() < 0.3, "power {p}");
        }
    }

    #[test]
    fn invalid_spec_rejected() {
        let p = DatasetParams::default();
        assert!(synthesize(&SynthSpec { n_harmonics: 0, ..SynthSpec::default() }, &p).is_err());
        assert!(synthesize(&SynthSpec { snr_db: vec![f64::NAN], ..SynthSpec::default() }, &p).is_err());
        assert!(synthesize(&SynthSpec { snr_db: vec![1.0, 2.0], ..SynthSpec::default() }, &p).is_err());
    }
}
