//! Fourier-domain power estimators: periodogram, Welch, Goertzel and STFT.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{FreqRange, Spectrogram, Spectrum};
use crate::linalg::Matrix;
use crate::{Error, Result};

/// Tapering windows, symmetric form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Rectangular,
    #[default]
    Hamming,
    Hann,
}

impl Window {
    pub fn coefficients(self, m: usize) -> Vec<f64> {
        if m == 1 {
            return vec![1.0];
        }
        let d = (m - 1) as f64;
        (0..m)
            .map(|n| {
                let c = (2.0 * PI * n as f64 / d).cos();
                match self {
                    Window::Rectangular => 1.0,
                    Window::Hamming => 0.54 - 0.46 * c,
                    Window::Hann => 0.5 - 0.5 * c,
                }
            })
            .collect()
    }
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rect" | "rectangular" | "boxcar" | "none" => Ok(Window::Rectangular),
            "hamming" => Ok(Window::Hamming),
            "hann" | "hanning" => Ok(Window::Hann),
            other => Err(Error::param("window", format!("unknown window `{other}`"))),
        }
    }
}

impl std::fmt::Display for Window {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Window::Rectangular => "rectangular",
            Window::Hamming => "hamming",
            Window::Hann => "hann",
        })
    }
}

fn check_signal(x: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::InsufficientData("empty signal".into()));
    }
    Ok(())
}

fn check_rate(fs: f64) -> Result<()> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::param("sample_rate", "must be positive"));
    }
    Ok(())
}

/// `|DFT_nfft(x)|^2` for every bin, `x` zero-padded to `nfft`.
fn power_bins(x: &[f64], nfft: usize, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let mut buf: Vec<Complex64> = x
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(nfft)
        .collect();
    planner.plan_fft_forward(nfft).process(&mut buf);
    buf.iter().map(|c| c.norm_sqr()).collect()
}

fn one_sided(two_sided: &[f64], nfft: usize, fs: f64) -> (Vec<f64>, Vec<f64>) {
    let bins = nfft / 2 + 1;
    let freqs = (0..bins).map(|k| k as f64 * fs / nfft as f64).collect();
    (two_sided[..bins].to_vec(), freqs)
}

/// Two-sided `|DFT(x)|^2 / N` over all `nfft` bins; `sum = sum x^2` when
/// `nfft == len(x)`.
pub fn periodogram_two_sided(x: &[f64], nfft: usize) -> Result<Vec<f64>> {
    check_signal(x)?;
    if nfft < x.len() {
        return Err(Error::param(
            "nfft",
            format!("{nfft} is shorter than the signal ({}); truncation is not allowed", x.len()),
        ));
    }
    let n = x.len() as f64;
    let mut planner = FftPlanner::new();
    Ok(power_bins(x, nfft, &mut planner)
        .into_iter()
        .map(|p| p / n)
        .collect())
}

/// One-sided periodogram `|DFT(x)|^2 / N` restricted to `range`.
pub fn periodogram(x: &[f64], fs: f64, nfft: usize, range: FreqRange) -> Result<Spectrum> {
    check_rate(fs)?;
    let two = periodogram_two_sided(x, nfft)?;
    let (values, freqs) = one_sided(&two, nfft, fs);
    Spectrum::new(values, freqs, "periodogram", format!("nfft={nfft}")).restrict(range)
}

/// Welch averaging parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchParams {
    pub segment_len: usize,
    pub overlap: f64,
    pub nfft: usize,
    pub window: Window,
}

impl Default for WelchParams {
    fn default() -> Self {
        WelchParams {
            segment_len: 156,
            overlap: 0.5,
            nfft: 512,
            window: Window::Hamming,
        }
    }
}

impl WelchParams {
    /// Hop between segment starts, `round(M (1 - overlap))`, at least 1.
    pub fn hop(&self) -> usize {
        ((self.segment_len as f64 * (1.0 - self.overlap)).round() as usize).max(1)
    }

    /// Number of averaged segments for a signal of length `n`.
    pub fn n_segments(&self, n: usize) -> usize {
        if n < self.segment_len {
            0
        } else {
            (n - self.segment_len) / self.hop() + 1
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.segment_len == 0 {
            return Err(Error::param("segment_len", "must be positive"));
        }
        if self.segment_len > n {
            return Err(Error::param(
                "segment_len",
                format!("{} exceeds signal length {n}", self.segment_len),
            ));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::param("overlap", "must lie in [0, 1)"));
        }
        if self.nfft < self.segment_len {
            return Err(Error::param(
                "nfft",
                format!("{} is shorter than segment_len {}", self.nfft, self.segment_len),
            ));
        }
        Ok(())
    }
}

/// Welch power estimate: average of windowed segment periodograms
/// `|sum_m w[m] x_i[m] e^{-jwm}|^2 / (M U)`, `U = (1/M) sum w^2`.
pub fn welch(x: &[f64], fs: f64, params: &WelchParams, range: FreqRange) -> Result<Spectrum> {
    check_signal(x)?;
    check_rate(fs)?;
    params.validate(x.len())?;
    let m = params.segment_len;
    let w = params.window.coefficients(m);
    let u = w.iter().map(|v| v * v).sum::<f64>() / m as f64;
    if u <= 0.0 {
        return Err(Error::param("window", "window is identically zero"));
    }
    let hop = params.hop();
    let k = params.n_segments(x.len());
    let mut planner = FftPlanner::new();
    let mut acc = vec![0.0; params.nfft];
    let mut seg = vec![0.0; m];
    for i in 0..k {
        let start = i * hop;
        for (j, s) in seg.iter_mut().enumerate() {
            *s = w[j] * x[start + j];
        }
        for (a, p) in acc.iter_mut().zip(power_bins(&seg, params.nfft, &mut planner)) {
            *a += p;
        }
    }
    let norm = 1.0 / (k as f64 * m as f64 * u);
    acc.iter_mut().for_each(|v| *v *= norm);
    let (values, freqs) = one_sided(&acc, params.nfft, fs);
    Spectrum::new(
        values,
        freqs,
        "welch",
        format!(
            "nfft={} segment_len={} overlap={} window={} segments={k}",
            params.nfft, m, params.overlap, params.window
        ),
    )
    .restrict(range)
}

/// Goertzel power at angular frequency `w` in Reinsch form: the recurrence
/// carries `s[k] -/+ s[k-1]` with `k = -4 sin^2(w/2)` or `4 cos^2(w/2)`, which
/// stays accurate where `cos w` is close to +1 or -1.
fn goertzel_power(x: &[f64], w: f64) -> f64 {
    let (mut s, mut d) = (0.0, 0.0);
    let power = if w.cos() >= 0.0 {
        let k = -4.0 * (w / 2.0).sin().powi(2);
        for &v in x {
            d += v + k * s;
            s += d;
        }
        // s1 = s, s2 = s - d
        d * d - k * s * (s - d)
    } else {
        let k = 4.0 * (w / 2.0).cos().powi(2);
        for &v in x {
            d = v + k * s - d;
            s = d - s;
        }
        // s1 = s, s2 = d - s
        d * d - k * s * (d - s)
    };
    power.max(0.0)
}

/// `|X(f)|^2` at each target frequency via the Goertzel recurrence.
pub fn goertzel(x: &[f64], fs: f64, targets: &[f64]) -> Result<Spectrum> {
    check_signal(x)?;
    check_rate(fs)?;
    let nyq = fs / 2.0;
    if let Some(&bad) = targets.iter().find(|&&f| !(0.0..=nyq).contains(&f)) {
        return Err(Error::param(
            "target_freqs",
            format!("{bad} Hz outside [0, {nyq}]"),
        ));
    }
    let values = targets
        .iter()
        .map(|&f| goertzel_power(x, 2.0 * PI * f / fs))
        .collect();
    Ok(Spectrum {
        values,
        freq_axis: targets.to_vec(),
        method: "goertzel".into(),
        params: format!("n_targets={}", targets.len()),
    })
}

/// Short-time Fourier transform power `|S[m, f]|^2` on one-sided bins.
pub fn stft(
    x: &[f64],
    fs: f64,
    window: Window,
    win_len: usize,
    hop: usize,
    nfft: usize,
) -> Result<Spectrogram> {
    check_signal(x)?;
    check_rate(fs)?;
    if win_len == 0 || win_len > x.len() {
        return Err(Error::param(
            "window_len",
            format!("must be in 1..={}", x.len()),
        ));
    }
    if hop == 0 {
        return Err(Error::param("hop", "must be at least 1"));
    }
    if nfft < win_len {
        return Err(Error::param("nfft", "must be at least the window length"));
    }
    if hop > win_len {
        log::warn!("STFT hop {hop} exceeds window {win_len}; samples between frames are skipped");
    }
    let w = window.coefficients(win_len);
    let frames = (x.len() - win_len) / hop + 1;
    let bins = nfft / 2 + 1;
    let mut planner = FftPlanner::new();
    let mut values = Matrix::zeros(frames, bins);
    let mut seg = vec![0.0; win_len];
    for m in 0..frames {
        let start = m * hop;
        for (j, s) in seg.iter_mut().enumerate() {
            *s = w[j] * x[start + j];
        }
        let p = power_bins(&seg, nfft, &mut planner);
        values.row_mut(m).copy_from_slice(&p[..bins]);
    }
    Ok(Spectrogram {
        values,
        time_axis: (0..frames)
            .map(|m| (m * hop) as f64 / fs + (win_len as f64 - 1.0) / (2.0 * fs))
            .collect(),
        freq_axis: (0..bins).map(|k| k as f64 * fs / nfft as f64).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const FS: f64 = 250.0;

    fn dft_power(x: &[f64], w: f64) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (n, v) in x.iter().enumerate() {
            re += v * (w * n as f64).cos();
            im -= v * (w * n as f64).sin();
        }
        re * re + im * im
    }

    fn sine(f: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * f * i as f64 / FS).sin()).collect()
    }

    #[test]
    fn on_bin_sine_is_isolated() {
        let n = 500;
        let f0 = 10.0; // bin 20 of 500 at 250 Hz
        let s = periodogram(&sine(f0, n), FS, n, FreqRange::full()).unwrap();
        let (imax, peak) = s.argmax().unwrap();
        assert_eq!(imax, 20);
        for (i, v) in s.values.iter().enumerate() {
            if i != imax {
                assert!(*v <= 1e-10 * peak, "bin {i}: {v}");
            }
        }
    }

    #[test]
    fn default_shape_is_257_bins() {
        let x = sine(12.0, 500);
        let s = periodogram(&x, FS, 512, FreqRange::new(0.0, 125.0)).unwrap();
        assert_eq!(s.values.len(), 257);
        let w = welch(
            &x,
            FS,
            &WelchParams {
                segment_len: 350,
                overlap: 0.75,
                nfft: 512,
                window: Window::Hamming,
            },
            FreqRange::full(),
        )
        .unwrap();
        assert_eq!(w.values.len(), 257);
    }

    #[test]
    fn truncation_and_empty_rejected() {
        assert!(periodogram(&[1.0; 600], FS, 512, FreqRange::full()).is_err());
        assert!(periodogram(&[], FS, 512, FreqRange::full()).is_err());
        let z = periodogram(&[0.0; 100], FS, 128, FreqRange::full()).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn welch_single_rect_segment_is_periodogram() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..300).map(|_| rng.random::<f64>() - 0.5).collect();
        let p = periodogram(&x, FS, 512, FreqRange::full()).unwrap();
        let w = welch(
            &x,
            FS,
            &WelchParams {
                segment_len: 300,
                overlap: 0.0,
                nfft: 512,
                window: Window::Rectangular,
            },
            FreqRange::full(),
        )
        .unwrap();
        for (a, b) in p.values.iter().zip(&w.values) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
        }
    }

    #[test]
    fn welch_matches_direct_segment_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..400).map(|_| rng.random::<f64>()).collect();
        let params = WelchParams {
            segment_len: 100,
            overlap: 0.5,
            nfft: 128,
            window: Window::Hann,
        };
        let s = welch(&x, FS, &params, FreqRange::full()).unwrap();
        let w = Window::Hann.coefficients(100);
        let u: f64 = w.iter().map(|v| v * v).sum::<f64>() / 100.0;
        let starts = [0usize, 50, 100, 150, 200, 250, 300];
        for k in [0usize, 5, 33, 64] {
            let om = 2.0 * PI * k as f64 / 128.0;
            let avg: f64 = starts
                .iter()
                .map(|&st| {
                    let seg: Vec<f64> = (0..100).map(|j| w[j] * x[st + j]).collect();
                    dft_power(&seg, om) / (100.0 * u)
                })
                .sum::<f64>()
                / starts.len() as f64;
            assert!((s.values[k] - avg).abs() <= 1e-9 * avg, "bin {k}");
        }
    }

    #[test]
    fn goertzel_matches_dft_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 250;
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let targets: Vec<f64> = (0..=n / 2).map(|k| k as f64 * FS / n as f64).collect();
        let g = goertzel(&x, FS, &targets).unwrap();
        for (k, v) in g.values.iter().enumerate() {
            let want = dft_power(&x, 2.0 * PI * k as f64 / n as f64);
            assert!((v - want).abs() <= 1e-9 * want.max(1e-12), "k={k}: {v} vs {want}");
        }
        // off-grid targets follow the DTFT
        let g = goertzel(&x, FS, &[7.3]).unwrap();
        let want = dft_power(&x, 2.0 * PI * 7.3 / FS);
        assert!((g.values[0] - want).abs() <= 1e-9 * want);
        assert!(goertzel(&x, FS, &[130.0]).is_err());
        assert!(goertzel(&[0.0; 10], FS, &[10.0]).unwrap().values[0] == 0.0);
    }

    #[test]
    fn three_estimators_agree_on_argmax() {
        let x = sine(12.5, 500);
        let p = periodogram(&x, FS, 500, FreqRange::full()).unwrap();
        let w = welch(
            &x,
            FS,
            &WelchParams {
                segment_len: 250,
                overlap: 0.5,
                nfft: 500,
                window: Window::Hamming,
            },
            FreqRange::full(),
        )
        .unwrap();
        let g = goertzel(&x, FS, &p.freq_axis).unwrap();
        let fp = p.freq_axis[p.argmax().unwrap().0];
        assert_eq!(fp, 12.5);
        assert_eq!(w.freq_axis[w.argmax().unwrap().0], fp);
        assert_eq!(g.freq_axis[g.argmax().unwrap().0], fp);
    }

    #[test]
    fn stft_stationary_and_chirp() {
        let x = sine(10.0, 1250);
        let s = stft(&x, FS, Window::Hamming, 250, 125, 500).unwrap();
        let peaks: Vec<usize> = s.values.rows().map(argmax).collect();
        assert!(peaks.iter().all(|&p| p == peaks[0]));

        let n = 1250;
        let dur = n as f64 / FS;
        let chirp: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / FS;
                (2.0 * PI * (8.0 * t + 0.5 * (4.0 / dur) * t * t)).sin()
            })
            .collect();
        let s = stft(&chirp, FS, Window::Hamming, 250, 125, 1000).unwrap();
        let peaks: Vec<usize> = s.values.rows().map(argmax).collect();
        assert!(peaks.windows(2).all(|w| w[0] <= w[1]), "{peaks:?}");
    }

    #[test]
    fn stft_single_frame_is_windowed_periodogram() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..256).map(|_| rng.random::<f64>()).collect();
        let s = stft(&x, FS, Window::Hann, 256, 256, 256).unwrap();
        assert_eq!(s.values.nrows(), 1);
        let w = Window::Hann.coefficients(256);
        let xw: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a * b).collect();
        let p = periodogram(&xw, FS, 256, FreqRange::full()).unwrap();
        for (a, b) in s.values.row(0).iter().zip(&p.values) {
            assert!((a / 256.0 - b).abs() <= 1e-10 * b.max(1e-12));
        }
    }

    fn argmax(r: &[f64]) -> usize {
        r.iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
            .0
    }

    proptest! {
        #[test]
        fn parseval(x in prop::collection::vec(-100.0f64..100.0, 1..300)) {
            let p = periodogram_two_sided(&x, x.len()).unwrap();
            let lhs: f64 = p.iter().sum();
            let rhs: f64 = x.iter().map(|v| v * v).sum();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1e-300));
        }

        #[test]
        fn spectra_non_negative(x in prop::collection::vec(-10.0f64..10.0, 200..400)) {
            let w = welch(&x, FS, &WelchParams { segment_len: 100, ..WelchParams::default() }, FreqRange::full()).unwrap();
            prop_assert!(w.values.iter().all(|&v| v >= 0.0));
            let g = goertzel(&x, FS, &[6.66, 10.0, 24.0]).unwrap();
            prop_assert!(g.values.iter().all(|&v| v >= 0.0));
        }
    }
}
