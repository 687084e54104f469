//! Band-pass filter design and application, plus per-trial zero-mean
//! normalization.
//!
//! Filters follow the difference equation
//! `y[n] = sum_{k=1..K} a[k] y[n-k] + sum_{m=0..M} b[m] x[n-m]`
//! with zero initial conditions. Note the sign of the feedback term: the
//! `a` returned by [`FilterCoefficients::a`] is the negation of the usual
//! denominator polynomial tail.

mod elliptic;
mod fir;
mod iir;

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use elliptic::{arc_jac_sc1, ellipdeg, ellipf, ellipj, ellipk, ellipkm1};
pub use iir::{iir_min_order, SecondOrderSection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterFamily {
    FirLeastSquares,
    IirButterworth,
    IirChebyshev1,
    IirChebyshev2,
    IirElliptic,
}

impl FilterFamily {
    pub fn is_fir(self) -> bool {
        matches!(self, FilterFamily::FirLeastSquares)
    }
}

impl std::str::FromStr for FilterFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let k = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        Ok(match k.as_str() {
            "fir" | "fir_ls" | "fir_least_squares" | "least_squares" | "ls" => {
                FilterFamily::FirLeastSquares
            }
            "butter" | "butterworth" | "iir_butterworth" => FilterFamily::IirButterworth,
            "cheby1" | "chebyshev1" | "chebyshev_1" | "iir_chebyshev1" | "chebyshev" => {
                FilterFamily::IirChebyshev1
            }
            "cheby2" | "chebyshev2" | "chebyshev_2" | "iir_chebyshev2" => {
                FilterFamily::IirChebyshev2
            }
            "ellip" | "elliptic" | "iir_elliptic" => FilterFamily::IirElliptic,
            _ => return Err(Error::param("family", format!("unknown filter family `{s}`"))),
        })
    }
}

impl std::fmt::Display for FilterFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FilterFamily::FirLeastSquares => "fir_least_squares",
            FilterFamily::IirButterworth => "iir_butterworth",
            FilterFamily::IirChebyshev1 => "iir_chebyshev1",
            FilterFamily::IirChebyshev2 => "iir_chebyshev2",
            FilterFamily::IirElliptic => "iir_elliptic",
        })
    }
}

/// Band-pass specification. Edge frequencies are in Hz, attenuations and
/// ripple in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub stopband1_hz: f64,
    pub passband1_hz: f64,
    pub passband2_hz: f64,
    pub stopband2_hz: f64,
    pub stop_atten1_db: f64,
    pub stop_atten2_db: f64,
    pub passband_ripple_db: f64,
    pub family: FilterFamily,
    pub max_fir_order: usize,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec {
            stopband1_hz: 4.0,
            passband1_hz: 5.0,
            passband2_hz: 48.0,
            stopband2_hz: 50.0,
            stop_atten1_db: 60.0,
            stop_atten2_db: 60.0,
            passband_ripple_db: 1.0,
            family: FilterFamily::IirChebyshev1,
            max_fir_order: 400,
        }
    }
}

impl FilterSpec {
    pub fn with_family(family: FilterFamily) -> Self {
        FilterSpec {
            family,
            ..FilterSpec::default()
        }
    }

    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::param("sample_rate", "must be positive"));
        }
        let edges = [
            0.0,
            self.stopband1_hz,
            self.passband1_hz,
            self.passband2_hz,
            self.stopband2_hz,
            sample_rate / 2.0,
        ];
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param(
                "band_edges",
                format!(
                    "need 0 < stopband1 < passband1 < passband2 < stopband2 < fs/2, got {:?}",
                    &edges[1..]
                ),
            ));
        }
        for (name, v) in [
            ("stop_atten1_db", self.stop_atten1_db),
            ("stop_atten2_db", self.stop_atten2_db),
            ("passband_ripple_db", self.passband_ripple_db),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, "must be positive"));
            }
        }
        if self.passband_ripple_db >= self.stop_atten1_db.min(self.stop_atten2_db) {
            return Err(Error::param(
                "passband_ripple_db",
                "must be smaller than the stopband attenuation",
            ));
        }
        if self.family.is_fir() && self.max_fir_order < 2 {
            return Err(Error::param("max_fir_order", "must be at least 2"));
        }
        Ok(())
    }
}

/// Designed filter. IIR filters are held as a cascade of second-order
/// sections; `Direct` holds raw difference-equation coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FilterCoefficients {
    Fir { taps: Vec<f64> },
    Iir { sections: Vec<SecondOrderSection> },
    Direct { b: Vec<f64>, a: Vec<f64> },
}

impl FilterCoefficients {
    pub fn fir(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() || taps.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("b", "must be non-empty and finite"));
        }
        Ok(FilterCoefficients::Fir { taps })
    }

    /// Raw coefficients of the difference equation (feedback sign as in the
    /// module docs). Rejects recurrences whose poles are not strictly inside
    /// the unit circle.
    pub fn direct(b: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        if b.is_empty() || b.iter().chain(&a).any(|v| !v.is_finite()) {
            return Err(Error::param("b", "must be non-empty and finite"));
        }
        if a.is_empty() {
            return Ok(FilterCoefficients::Fir { taps: b });
        }
        let k = a.len();
        // companion matrix of z^K - a1 z^(K-1) - ... - aK
        let mut comp = DMatrix::zeros(k, k);
        for (j, &aj) in a.iter().enumerate() {
            comp[(0, j)] = aj;
        }
        for i in 1..k {
            comp[(i, i - 1)] = 1.0;
        }
        let radius = comp
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if radius >= 1.0 {
            return Err(Error::Design(format!(
                "recurrence is unstable (pole radius {radius:.6})"
            )));
        }
        Ok(FilterCoefficients::Direct { b, a })
    }

    pub fn is_fir(&self) -> bool {
        match self {
            FilterCoefficients::Fir { .. } => true,
            FilterCoefficients::Direct { a, .. } => a.is_empty(),
            FilterCoefficients::Iir { .. } => false,
        }
    }

    /// Feed-forward coefficients `b[0..M]` of the expanded transfer function.
    pub fn b(&self) -> Vec<f64> {
        match self {
            FilterCoefficients::Fir { taps } => taps.clone(),
            FilterCoefficients::Direct { b, .. } => b.clone(),
            FilterCoefficients::Iir { sections } => sections
                .iter()
                .fold(vec![1.0], |acc, s| convolve(&acc, &s.b)),
        }
    }

    /// Feedback coefficients `a[1..K]` in difference-equation sign; empty
    /// for FIR filters.
    pub fn a(&self) -> Vec<f64> {
        match self {
            FilterCoefficients::Fir { .. } => Vec::new(),
            FilterCoefficients::Direct { a, .. } => a.clone(),
            FilterCoefficients::Iir { sections } => {
                let den = sections.iter().fold(vec![1.0], |acc, s| {
                    convolve(&acc, &[1.0, s.a[0], s.a[1]])
                });
                den[1..].iter().map(|v| -v).collect()
            }
        }
    }

    /// Number of poles (IIR) or taps minus one (FIR).
    pub fn order(&self) -> usize {
        match self {
            FilterCoefficients::Fir { taps } => taps.len() - 1,
            FilterCoefficients::Direct { b, a } => (b.len() - 1).max(a.len()),
            FilterCoefficients::Iir { sections } => 2 * sections.len(),
        }
    }

    /// Complex response at `freq_hz`.
    pub fn response(&self, freq_hz: f64, sample_rate: f64) -> Complex64 {
        let w = 2.0 * std::f64::consts::PI * freq_hz / sample_rate;
        let zinv = Complex64::from_polar(1.0, -w);
        let poly = |c: &[f64]| {
            c.iter()
                .rev()
                .fold(Complex64::new(0.0, 0.0), |acc, &v| acc * zinv + v)
        };
        match self {
            FilterCoefficients::Fir { taps } => poly(taps),
            FilterCoefficients::Direct { b, a } => {
                let den: Vec<f64> = std::iter::once(1.0).chain(a.iter().map(|v| -v)).collect();
                poly(b) / poly(&den)
            }
            FilterCoefficients::Iir { sections } => sections
                .iter()
                .map(|s| s.response(zinv))
                .product(),
        }
    }

    /// Magnitude response in dB at `freq_hz`.
    pub fn magnitude_db(&self, freq_hz: f64, sample_rate: f64) -> f64 {
        20.0 * self.response(freq_hz, sample_rate).norm().max(1e-300).log10()
    }

    /// First `n` samples of the impulse response.
    pub fn impulse_response(&self, n: usize) -> Vec<f64> {
        let mut x = vec![0.0; n];
        if n > 0 {
            x[0] = 1.0;
        }
        apply_filter(self, &x)
    }

    /// Largest pole radius (0 for FIR).
    pub fn max_pole_radius(&self) -> f64 {
        match self {
            FilterCoefficients::Fir { .. } => 0.0,
            FilterCoefficients::Iir { sections } => sections
                .iter()
                .map(SecondOrderSection::pole_radius)
                .fold(0.0, f64::max),
            FilterCoefficients::Direct { a, .. } => {
                if a.is_empty() {
                    return 0.0;
                }
                let k = a.len();
                let mut comp = DMatrix::zeros(k, k);
                for (j, &aj) in a.iter().enumerate() {
                    comp[(0, j)] = aj;
                }
                for i in 1..k {
                    comp[(i, i - 1)] = 1.0;
                }
                comp.complex_eigenvalues()
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max)
            }
        }
    }

    /// CSV rendering: one row per tap for FIR, one row per section
    /// (`b0,b1,b2,a1,a2` in difference-equation sign) for IIR.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self {
            FilterCoefficients::Fir { taps } => {
                out.push_str("index,b\n");
                for (i, v) in taps.iter().enumerate() {
                    let _ = writeln!(out, "{i},{v:e}");
                }
            }
            FilterCoefficients::Iir { sections } => {
                out.push_str("section,b0,b1,b2,a1,a2\n");
                for (i, s) in sections.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "{i},{:e},{:e},{:e},{:e},{:e}",
                        s.b[0], s.b[1], s.b[2], -s.a[0], -s.a[1]
                    );
                }
            }
            FilterCoefficients::Direct { b, a } => {
                out.push_str("kind,index,value\n");
                for (i, v) in b.iter().enumerate() {
                    let _ = writeln!(out, "b,{i},{v:e}");
                }
                for (i, v) in a.iter().enumerate() {
                    let _ = writeln!(out, "a,{},{v:e}", i + 1);
                }
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Frequency grid used for compliance checks.
const CHECK_STEP_HZ: f64 = 0.05;

/// Worst-case figures of a realized response against a spec.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Compliance {
    /// Smallest attenuation (dB, positive) found over the checked stopbands.
    pub min_stop_atten_db: f64,
    /// Largest |gain in dB| over the passband.
    pub max_pass_dev_db: f64,
    /// Largest gain in dB anywhere in `[0, fs/2]`.
    pub max_gain_db: f64,
    pub ok: bool,
}

/// Measures the response of `coeffs` over `[0, stop_lo]`, `[stop_hi, fs/2]`
/// and `[passband1, passband2]`. The gain may nowhere exceed the passband
/// tolerance.
pub fn check_compliance(
    coeffs: &FilterCoefficients,
    spec: &FilterSpec,
    sample_rate: f64,
    stop_lo: f64,
    stop_hi: f64,
) -> Compliance {
    let nyq = sample_rate / 2.0;
    let grid = |lo: f64, hi: f64| {
        let n = ((hi - lo) / CHECK_STEP_HZ).ceil().max(1.0) as usize;
        (0..=n).map(move |i| lo + (hi - lo) * i as f64 / n as f64)
    };
    let stop1 = grid(0.0, stop_lo)
        .map(|f| -coeffs.magnitude_db(f, sample_rate))
        .fold(f64::INFINITY, f64::min);
    let stop2 = grid(stop_hi, nyq)
        .map(|f| -coeffs.magnitude_db(f, sample_rate))
        .fold(f64::INFINITY, f64::min);
    let pass = grid(spec.passband1_hz, spec.passband2_hz)
        .map(|f| coeffs.magnitude_db(f, sample_rate).abs())
        .fold(0.0, f64::max);
    let gain = grid(0.0, nyq)
        .map(|f| coeffs.magnitude_db(f, sample_rate))
        .fold(f64::NEG_INFINITY, f64::max);
    let tol = spec.passband_ripple_db + 0.5;
    let ok = stop1 >= spec.stop_atten1_db - 3.0
        && stop2 >= spec.stop_atten2_db - 3.0
        && pass <= tol
        && gain <= tol;
    Compliance {
        min_stop_atten_db: stop1.min(stop2),
        max_pass_dev_db: pass,
        max_gain_db: gain,
        ok,
    }
}

/// Designs a band-pass filter meeting `spec` at `sample_rate`.
///
/// IIR families use the minimum order meeting the spec (bumped if the
/// realized response misses the tolerance). The least-squares FIR uses the
/// largest even order not exceeding `max_fir_order`; its stopband is checked
/// from two transition widths beyond each stopband edge.
pub fn design_filter(spec: &FilterSpec, sample_rate: f64) -> Result<FilterCoefficients> {
    spec.validate(sample_rate)?;
    let coeffs = if spec.family.is_fir() {
        fir::design(spec, sample_rate)?
    } else {
        iir::design(spec, sample_rate)?
    };
    log::debug!(
        "designed {} band-pass of order {}",
        spec.family,
        coeffs.order()
    );
    Ok(coeffs)
}

/// Runs the difference equation over `x` with zero initial state.
pub fn apply_filter(coeffs: &FilterCoefficients, x: &[f64]) -> Vec<f64> {
    match coeffs {
        FilterCoefficients::Fir { taps } => fir_filter(taps, x),
        FilterCoefficients::Direct { b, a } => {
            let mut y = vec![0.0; x.len()];
            for n in 0..x.len() {
                let mut acc = 0.0;
                for (m, bm) in b.iter().enumerate().take(n + 1) {
                    acc += bm * x[n - m];
                }
                for (k, ak) in a.iter().enumerate().take(n) {
                    acc += ak * y[n - k - 1];
                }
                y[n] = acc;
            }
            y
        }
        FilterCoefficients::Iir { sections } => {
            let mut y = x.to_vec();
            for s in sections {
                s.run(&mut y);
            }
            y
        }
    }
}

fn fir_filter(taps: &[f64], x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|n| {
            let m = taps.len().min(n + 1);
            taps[..m].iter().zip(x[..=n].iter().rev()).map(|(b, v)| b * v).sum()
        })
        .collect()
}

/// `x - mean(x)`.
pub fn zero_mean(x: &[f64]) -> Vec<f64> {
    let m = crate::linalg::mean(x);
    let mut out: Vec<f64> = x.iter().map(|v| v - m).collect();
    // second pass removes the rounding residue of the first
    let r = crate::linalg::mean(&out);
    out.iter_mut().for_each(|v| *v -= r);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FS: f64 = 250.0;

    #[test]
    fn identity_filter() {
        let c = FilterCoefficients::direct(vec![1.0], vec![]).unwrap();
        let x = [1.0, -2.0, 3.5];
        assert_eq!(apply_filter(&c, &x), x.to_vec());
    }

    #[test]
    fn direct_recurrence_sign() {
        // y[n] = 0.5 y[n-1] + x[n]
        let c = FilterCoefficients::direct(vec![1.0], vec![0.5]).unwrap();
        let y = apply_filter(&c, &[1.0, 0.0, 0.0]);
        assert_eq!(y, vec![1.0, 0.5, 0.25]);
        assert!(FilterCoefficients::direct(vec![1.0], vec![1.0]).is_err());
    }

    #[test]
    fn zero_mean_examples() {
        assert_eq!(zero_mean(&[1.0, 2.0, 3.0]), vec![-1.0, 0.0, 1.0]);
        assert!(zero_mean(&[4.2; 7]).iter().all(|&v| v == 0.0));
        let x = [-1.0, 0.0, 1.0];
        assert_eq!(zero_mean(&x), x.to_vec());
    }

    #[test]
    fn degenerate_spec_rejected() {
        let spec = FilterSpec {
            passband1_hz: 4.0,
            ..FilterSpec::default()
        };
        assert!(matches!(
            design_filter(&spec, FS),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn family_parsing() {
        assert_eq!(
            "cheby1".parse::<FilterFamily>().unwrap(),
            FilterFamily::IirChebyshev1
        );
        assert_eq!(
            "elliptic".parse::<FilterFamily>().unwrap(),
            FilterFamily::IirElliptic
        );
        assert!("bessel".parse::<FilterFamily>().is_err());
    }

    #[test]
    fn every_family_meets_default_spec() {
        for fam in [
            FilterFamily::IirButterworth,
            FilterFamily::IirChebyshev1,
            FilterFamily::IirChebyshev2,
            FilterFamily::IirElliptic,
        ] {
            let spec = FilterSpec::with_family(fam);
            let c = design_filter(&spec, FS).unwrap();
            let r = check_compliance(&c, &spec, FS, spec.stopband1_hz, spec.stopband2_hz);
            assert!(r.ok, "{fam}: {r:?}");
            assert!(c.max_pole_radius() < 1.0);
        }
    }

    /// Largest |h[n]| / max|h| for n at or beyond `mult` slowest-pole time
    /// constants.
    fn tail_ratio(c: &FilterCoefficients, mult: f64) -> f64 {
        let tau = -1.0 / c.max_pole_radius().ln();
        let n0 = (mult * tau).ceil() as usize;
        let h = c.impulse_response(n0 + 500);
        let peak = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        h[n0..].iter().fold(0.0f64, |m, v| m.max(v.abs())) / peak
    }

    #[test]
    fn iir_impulse_response_decays() {
        for fam in [FilterFamily::IirChebyshev1, FilterFamily::IirElliptic] {
            let c = design_filter(&FilterSpec::with_family(fam), FS).unwrap();
            let r = tail_ratio(&c, 10.0);
            assert!(r < 1e-6, "{fam}: {r:e}");
        }
    }

    #[test]
    fn clustered_pole_designs_decay_more_slowly() {
        // many poles share nearly the slowest radius, so the envelope is
        // n^k r^n rather than r^n
        for fam in [FilterFamily::IirButterworth, FilterFamily::IirChebyshev2] {
            let c = design_filter(&FilterSpec::with_family(fam), FS).unwrap();
            let at10 = tail_ratio(&c, 10.0);
            assert!(at10 < 1e-5, "{fam}: {at10:e}");
            let at15 = tail_ratio(&c, 15.0);
            assert!(at15 < 1e-6, "{fam}: {at15:e}");
        }
    }

    #[test]
    fn sos_expansion_matches_cascade() {
        let c = design_filter(&FilterSpec::with_family(FilterFamily::IirElliptic), FS).unwrap();
        let d = FilterCoefficients::Direct { b: c.b(), a: c.a() };
        for f in [3.0, 10.0, 30.0, 70.0] {
            let h1 = c.response(f, FS);
            let h2 = d.response(f, FS);
            assert!((h1 - h2).norm() < 1e-4 * (1.0 + h1.norm()), "f={f}");
        }
    }

    #[test]
    fn fir_is_symmetric_and_capped() {
        let c = design_filter(&FilterSpec::with_family(FilterFamily::FirLeastSquares), FS).unwrap();
        assert!(c.a().is_empty());
        let b = c.b();
        assert!(b.len() <= 401);
        let m = b.len() - 1;
        for k in 0..=m {
            assert!((b[k] - b[m - k]).abs() <= 1e-12);
        }
    }

    #[test]
    fn csv_export_has_rows() {
        let c = design_filter(&FilterSpec::default(), FS).unwrap();
        let csv = c.to_csv();
        let lines = csv.lines().count();
        assert_eq!(lines, 1 + c.order() / 2);
    }

    proptest! {
        #[test]
        fn filtering_is_linear(
            x in prop::collection::vec(-10.0f64..10.0, 64),
            z in prop::collection::vec(-10.0f64..10.0, 64),
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
        ) {
            let c = design_filter(&FilterSpec::with_family(FilterFamily::IirElliptic), FS).unwrap();
            let mix: Vec<f64> = x.iter().zip(&z).map(|(a, b)| alpha * a + beta * b).collect();
            let lhs = apply_filter(&c, &mix);
            let yx = apply_filter(&c, &x);
            let yz = apply_filter(&c, &z);
            let scale = lhs.iter().chain(&yx).chain(&yz).fold(1e-300f64, |m, v| m.max(v.abs()));
            for i in 0..lhs.len() {
                let rhs = alpha * yx[i] + beta * yz[i];
                prop_assert!((lhs[i] - rhs).abs() <= 1e-9 * scale);
            }
        }

        #[test]
        fn zero_mean_bound(x in prop::collection::vec(-1e6f64..1e6, 1..200)) {
            let y = zero_mean(&x);
            let maxabs = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            prop_assert!(crate::linalg::mean(&y).abs() <= 1e-12 * maxabs.max(1e-300));
        }
    }
}
