//! Weighted least-squares linear-phase (type I) FIR band-pass design.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::{check_compliance, FilterCoefficients, FilterSpec};
use crate::{Error, Result};

/// Stopband weights tried in order; the first compliant design wins.
const STOP_WEIGHTS: [f64; 4] = [1.0, 10.0, 100.0, 1000.0];

/// `int_{w1}^{w2} cos(m w) dw`.
fn cos_integral(m: usize, w1: f64, w2: f64) -> f64 {
    if m == 0 {
        w2 - w1
    } else {
        let m = m as f64;
        ((m * w2).sin() - (m * w1).sin()) / m
    }
}

/// Least-squares amplitude fit `A(w) = sum_k g_k cos(k w)` over weighted
/// bands `(w1, w2, desired, weight)`; returns symmetric taps of length
/// `2 * half + 1`.
pub(super) fn least_squares(half: usize, bands: &[(f64, f64, f64, f64)]) -> Result<Vec<f64>> {
    let n = half + 1;
    let mut q = DMatrix::<f64>::zeros(n, n);
    let mut r = DVector::<f64>::zeros(n);
    for &(w1, w2, d, wt) in bands {
        for k in 0..n {
            r[k] += wt * d * cos_integral(k, w1, w2);
            for l in k..n {
                let v = 0.5 * wt * (cos_integral(k.abs_diff(l), w1, w2)
                    + cos_integral(k + l, w1, w2));
                q[(k, l)] += v;
            }
        }
    }
    for k in 0..n {
        for l in 0..k {
            q[(k, l)] = q[(l, k)];
        }
    }
    let g = match q.clone().cholesky() {
        Some(ch) => ch.solve(&r),
        None => q
            .lu()
            .solve(&r)
            .ok_or_else(|| Error::Design("least-squares system is singular".into()))?,
    };
    let mut taps = vec![0.0; 2 * half + 1];
    taps[half] = g[0];
    for k in 1..n {
        taps[half - k] = 0.5 * g[k];
        taps[half + k] = 0.5 * g[k];
    }
    Ok(taps)
}

/// Stopband edges used to judge the FIR: two transition widths beyond the
/// nominal edges.
pub fn fir_check_edges(spec: &FilterSpec) -> (f64, f64) {
    let lo = spec.stopband1_hz - 2.0 * (spec.passband1_hz - spec.stopband1_hz);
    let hi = spec.stopband2_hz + 2.0 * (spec.stopband2_hz - spec.passband2_hz);
    (lo.max(0.0), hi)
}

/// Stopband edges of the least-squares fit: each nominal edge moved outward
/// by half its transition width, between the nominal and checked edges.
fn fit_edges(spec: &FilterSpec) -> (f64, f64) {
    let lo = spec.stopband1_hz - 0.5 * (spec.passband1_hz - spec.stopband1_hz);
    let hi = spec.stopband2_hz + 0.5 * (spec.stopband2_hz - spec.passband2_hz);
    (lo.max(0.0), hi)
}

pub(super) fn design(spec: &FilterSpec, fs: f64) -> Result<FilterCoefficients> {
    let order = spec.max_fir_order - spec.max_fir_order % 2;
    let half = order / 2;
    let w = |f: f64| 2.0 * PI * f / fs;
    let (lo, hi) = fir_check_edges(spec);
    let mut best: Option<super::Compliance> = None;
    for &sw in &STOP_WEIGHTS {
        let (fit_lo, fit_hi) = fit_edges(spec);
        let bands = [
            (0.0, w(fit_lo), 0.0, sw),
            (w(spec.passband1_hz), w(spec.passband2_hz), 1.0, 1.0),
            (w(fit_hi), PI, 0.0, sw),
        ];
        let taps = least_squares(half, &bands)?;
        let coeffs = FilterCoefficients::fir(taps)?;
        let r = check_compliance(&coeffs, spec, fs, lo, hi);
        if r.ok {
            log::debug!("FIR stopband weight {sw}: {r:?}");
            return Ok(coeffs);
        }
        if best.is_none_or(|b| r.min_stop_atten_db > b.min_stop_atten_db) {
            best = Some(r);
        }
    }
    let r = best.expect("weights non-empty");
    Err(Error::Design(format!(
        "least-squares FIR of order {order} cannot meet spec: achieved {:.1} dB stopband attenuation, {:.2} dB passband deviation",
        r.min_stop_atten_db, r.max_pass_dev_db
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cos_integral_matches_quadrature() {
        let (a, b) = (0.3, 1.7);
        for m in 0..5 {
            let n = 20000;
            let h = (b - a) / n as f64;
            let quad: f64 = (0..n)
                .map(|i| (m as f64 * (a + (i as f64 + 0.5) * h)).cos() * h)
                .sum();
            assert!((quad - cos_integral(m, a, b)).abs() < 1e-8);
        }
    }

    #[test]
    fn full_band_unit_target_gives_impulse() {
        let taps = least_squares(4, &[(0.0, PI, 1.0, 1.0)]).unwrap();
        for (i, t) in taps.iter().enumerate() {
            let want = if i == 4 { 1.0 } else { 0.0 };
            assert!((t - want).abs() < 1e-12);
        }
    }
}
