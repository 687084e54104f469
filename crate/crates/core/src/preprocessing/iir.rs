//! IIR band-pass design: analog low-pass prototype, low-pass to band-pass
//! transform, bilinear transform with pre-warping, and second-order-section
//! realization.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::elliptic::{arc_jac_sc1, ellipdeg, ellipj, ellipk, ellipkm1};
use super::{check_compliance, FilterCoefficients, FilterFamily, FilterSpec};
use crate::{Error, Result};

/// Upper bound on the low-pass prototype order.
const MAX_PROTOTYPE_ORDER: usize = 200;
/// Extra orders tried when the minimum order misses the realized tolerance.
const ORDER_SLACK: usize = 4;

/// `H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a[0] z^-1 + a[1] z^-2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderSection {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl SecondOrderSection {
    pub fn response(&self, zinv: Complex64) -> Complex64 {
        let num = (zinv * self.b[2] + self.b[1]) * zinv + self.b[0];
        let den = (zinv * self.a[1] + self.a[0]) * zinv + 1.0;
        num / den
    }

    pub fn pole_radius(&self) -> f64 {
        let (a1, a2) = (self.a[0], self.a[1]);
        let disc = a1 * a1 - 4.0 * a2;
        if disc < 0.0 {
            a2.abs().sqrt()
        } else {
            let r = disc.sqrt();
            (0.5 * (-a1 + r)).abs().max((0.5 * (-a1 - r)).abs())
        }
    }

    /// In-place transposed direct form II pass with zero initial state.
    pub(super) fn run(&self, x: &mut [f64]) {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let (mut s1, mut s2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let xin = *v;
            let y = b0 * xin + s1;
            s1 = b1 * xin - a1 * y + s2;
            s2 = b2 * xin - a2 * y;
            *v = y;
        }
    }
}

/// Pre-warped analog band geometry.
#[derive(Debug, Clone, Copy)]
struct Band {
    w0: f64,
    bw: f64,
    /// Low-pass prototype stopband edge (passband edge at 1).
    nat: f64,
}

fn prewarp(f: f64, fs: f64) -> f64 {
    2.0 * fs * (PI * f / fs).tan()
}

fn band(spec: &FilterSpec, fs: f64) -> Band {
    let wp1 = prewarp(spec.passband1_hz, fs);
    let wp2 = prewarp(spec.passband2_hz, fs);
    let ws1 = prewarp(spec.stopband1_hz, fs);
    let ws2 = prewarp(spec.stopband2_hz, fs);
    let w0sq = wp1 * wp2;
    let bw = wp2 - wp1;
    let nat = [ws1, ws2]
        .iter()
        .map(|&ws| (ws * ws - w0sq).abs() / (ws * bw))
        .fold(f64::INFINITY, f64::min);
    Band {
        w0: w0sq.sqrt(),
        bw,
        nat,
    }
}

fn atten(spec: &FilterSpec) -> f64 {
    spec.stop_atten1_db.max(spec.stop_atten2_db)
}

/// Minimum low-pass prototype order meeting `spec`; the band-pass filter
/// has twice as many poles.
pub fn iir_min_order(spec: &FilterSpec, sample_rate: f64) -> Result<usize> {
    spec.validate(sample_rate)?;
    let nat = band(spec, sample_rate).nat;
    let gstop = 10f64.powf(0.1 * atten(spec)) - 1.0;
    let gpass = 10f64.powf(0.1 * spec.passband_ripple_db) - 1.0;
    let n = match spec.family {
        FilterFamily::IirButterworth => (gstop / gpass).log10() / (2.0 * nat.log10()),
        FilterFamily::IirChebyshev1 | FilterFamily::IirChebyshev2 => {
            (gstop / gpass).sqrt().acosh() / nat.acosh()
        }
        FilterFamily::IirElliptic => {
            let m = 1.0 / (nat * nat);
            let m1 = gpass / gstop;
            ellipk(m) * ellipkm1(m1) / (ellipkm1(m) * ellipk(m1))
        }
        FilterFamily::FirLeastSquares => {
            return Err(Error::param("family", "not an IIR family"));
        }
    };
    // guard against values like 9.000000001 from rounding
    Ok(((n - 1e-9).ceil() as usize).max(1))
}

/// Analog low-pass prototype in zero-pole-gain form, passband edge at 1.
struct Zpk {
    z: Vec<Complex64>,
    p: Vec<Complex64>,
    k: f64,
}

impl Zpk {
    fn dc_gain(&self) -> f64 {
        let num: Complex64 = self.z.iter().map(|z| -z).product();
        let den: Complex64 = self.p.iter().map(|p| -p).product();
        (num / den * self.k).norm()
    }
}

fn butterworth(n: usize, rp: f64) -> Zpk {
    // scaled so the loss at the passband edge equals rp exactly
    let wc = (10f64.powf(0.1 * rp) - 1.0).powf(-1.0 / (2.0 * n as f64));
    let p: Vec<Complex64> = (0..n)
        .map(|k| {
            let theta = PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
            Complex64::from_polar(wc, theta)
        })
        .collect();
    Zpk {
        z: vec![],
        k: wc.powi(n as i32),
        p,
    }
}

fn chebyshev1(n: usize, rp: f64) -> Zpk {
    let eps = (10f64.powf(0.1 * rp) - 1.0).sqrt();
    let mu = (1.0 / eps).asinh() / n as f64;
    let p: Vec<Complex64> = (0..n)
        .map(|k| {
            let theta = PI * (2 * k + 1) as f64 / (2 * n) as f64;
            Complex64::new(-mu.sinh() * theta.sin(), mu.cosh() * theta.cos())
        })
        .collect();
    let mut k = p.iter().map(|p| -p).product::<Complex64>().re;
    if n % 2 == 0 {
        k /= (1.0 + eps * eps).sqrt();
    }
    Zpk { z: vec![], p, k }
}

/// Chebyshev II prototype with its stopband edge moved to `nat`.
fn chebyshev2(n: usize, rs: f64, nat: f64) -> Zpk {
    let de = 1.0 / (10f64.powf(0.1 * rs) - 1.0).sqrt();
    let mu = (1.0 / de).asinh() / n as f64;
    let mut z = Vec::new();
    for k in 0..n {
        let m = -(n as i64) + 1 + 2 * k as i64;
        if n % 2 == 1 && m == 0 {
            continue;
        }
        let s = (PI * m as f64 / (2 * n) as f64).sin();
        z.push(Complex64::new(0.0, -1.0 / s) * nat);
    }
    let p: Vec<Complex64> = (0..n)
        .map(|k| {
            let m = -(n as i64) + 1 + 2 * k as i64;
            let e = -Complex64::from_polar(1.0, PI * m as f64 / (2 * n) as f64);
            let q = Complex64::new(mu.sinh() * e.re, mu.cosh() * e.im);
            nat / q
        })
        .collect();
    let num: Complex64 = p.iter().map(|p| -p).product();
    let den: Complex64 = z.iter().map(|z| -z).product();
    Zpk {
        k: (num / den).re,
        z,
        p,
    }
}

fn elliptic(n: usize, rp: f64, rs: f64) -> Zpk {
    let eps_sq = 10f64.powf(0.1 * rp) - 1.0;
    if n == 1 {
        let p = -(1.0 / eps_sq).sqrt();
        return Zpk {
            z: vec![],
            p: vec![Complex64::new(p, 0.0)],
            k: -p,
        };
    }
    let eps = eps_sq.sqrt();
    let ck1_sq = eps_sq / (10f64.powf(0.1 * rs) - 1.0);
    let val0 = ellipk(ck1_sq);
    let m = ellipdeg(n, ck1_sq);
    let capk = ellipk(m);
    let js: Vec<usize> = ((1 - n % 2)..n).step_by(2).collect();
    let sncd: Vec<(f64, f64, f64)> = js
        .iter()
        .map(|&j| ellipj(j as f64 * capk / n as f64, m))
        .collect();
    let mut z = Vec::new();
    for &(s, _, _) in &sncd {
        if s.abs() > f64::EPSILON {
            z.push(Complex64::new(0.0, 1.0 / (m.sqrt() * s)));
        }
    }
    let zc: Vec<Complex64> = z.iter().map(|v| v.conj()).collect();
    z.extend(zc);

    let r = arc_jac_sc1(1.0 / eps, ck1_sq);
    let v0 = capk * r / (n as f64 * val0);
    let (sv, cv, dv) = ellipj(v0, 1.0 - m);
    let mut p: Vec<Complex64> = sncd
        .iter()
        .map(|&(s, c, d)| {
            -Complex64::new(c * d * sv * cv, s * dv) / (1.0 - (d * sv).powi(2))
        })
        .collect();
    if n % 2 == 1 {
        let norm = p.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let extra: Vec<Complex64> = p
            .iter()
            .filter(|v| v.im.abs() > f64::EPSILON * norm)
            .map(|v| v.conj())
            .collect();
        p.extend(extra);
    } else {
        let extra: Vec<Complex64> = p.iter().map(|v| v.conj()).collect();
        p.extend(extra);
    }
    let num: Complex64 = p.iter().map(|p| -p).product();
    let den: Complex64 = z.iter().map(|z| -z).product();
    let mut k = (num / den).re;
    if n % 2 == 0 {
        k /= (1.0 + eps_sq).sqrt();
    }
    Zpk { z, p, k }
}

fn prototype(spec: &FilterSpec, n: usize, nat: f64) -> Zpk {
    let rp = spec.passband_ripple_db;
    let rs = atten(spec);
    match spec.family {
        FilterFamily::IirButterworth => butterworth(n, rp),
        FilterFamily::IirChebyshev1 => chebyshev1(n, rp),
        FilterFamily::IirChebyshev2 => chebyshev2(n, rs, nat),
        FilterFamily::IirElliptic => elliptic(n, rp, rs),
        FilterFamily::FirLeastSquares => unreachable!("FIR handled elsewhere"),
    }
}

/// `s -> (s^2 + w0^2) / (bw s)` applied to one root.
fn lp2bp_root(r: Complex64, b: &Band) -> [Complex64; 2] {
    let h = r * (b.bw / 2.0);
    let d = (h * h - b.w0 * b.w0).sqrt();
    [h + d, h - d]
}

fn bilinear(s: Complex64, fs: f64) -> Complex64 {
    let fs2 = 2.0 * fs;
    (fs2 + s) / (fs2 - s)
}

/// Digital zeros and poles of the band-pass filter.
fn digital_roots(proto: &Zpk, b: &Band, fs: f64) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut z: Vec<Complex64> = proto
        .z
        .iter()
        .flat_map(|&r| lp2bp_root(r, b))
        .map(|s| bilinear(s, fs))
        .collect();
    let p: Vec<Complex64> = proto
        .p
        .iter()
        .flat_map(|&r| lp2bp_root(r, b))
        .map(|s| bilinear(s, fs))
        .collect();
    let excess = proto.p.len() - proto.z.len();
    // band-pass adds `excess` zeros at s = 0 and leaves `excess` at infinity
    z.extend(std::iter::repeat_n(Complex64::new(1.0, 0.0), excess));
    z.extend(std::iter::repeat_n(Complex64::new(-1.0, 0.0), excess));
    (z, p)
}

/// Upper-half-plane complex roots and real roots.
fn split_roots(roots: &[Complex64]) -> Result<(Vec<Complex64>, Vec<f64>)> {
    let tol = 1e-9;
    let mut real = Vec::new();
    let mut upper = Vec::new();
    let mut lower = 0usize;
    for &r in roots {
        if r.im.abs() <= tol * (1.0 + r.norm()) {
            real.push(r.re);
        } else if r.im > 0.0 {
            upper.push(r);
        } else {
            lower += 1;
        }
    }
    if lower != upper.len() || real.len() % 2 != 0 {
        return Err(Error::Design("roots do not form conjugate pairs".into()));
    }
    Ok((upper, real))
}

/// Groups roots into conjugate pairs; real roots are paired smallest with
/// largest.
fn conjugate_pairs(roots: &[Complex64]) -> Result<Vec<[Complex64; 2]>> {
    let (upper, mut real) = split_roots(roots)?;
    real.sort_by(f64::total_cmp);
    let mut out: Vec<[Complex64; 2]> = upper.into_iter().map(|r| [r, r.conj()]).collect();
    let (mut i, mut j) = (0, real.len());
    while i < j {
        j -= 1;
        out.push([Complex64::new(real[i], 0.0), Complex64::new(real[j], 0.0)]);
        i += 1;
    }
    Ok(out)
}

fn poly2(pair: &[Complex64; 2]) -> [f64; 2] {
    let s = pair[0] + pair[1];
    let p = pair[0] * pair[1];
    [-s.re, p.re]
}

/// Peak magnitude of a section, sampled on a uniform grid plus the pole
/// angles where resonances sit.
fn peak_gain(s: &SecondOrderSection, poles: &[Complex64; 2]) -> f64 {
    const GRID: usize = 4096;
    (0..=GRID)
        .map(|i| PI * i as f64 / GRID as f64)
        .chain(poles.iter().map(|p| p.arg().abs()))
        .map(|w| s.response(Complex64::from_polar(1.0, -w)).norm())
        .fold(0.0, f64::max)
}

/// Pairs poles with zeros and orders sections so those with poles
/// nearest the unit circle come last.
fn to_sections(
    z: &[Complex64],
    p: &[Complex64],
    gain: f64,
    zinv_center: Complex64,
) -> Result<Vec<SecondOrderSection>> {
    let mut ppairs = conjugate_pairs(p)?;
    let (mut zc, mut zr) = split_roots(z)?;
    if zc.len() + zr.len() / 2 != ppairs.len() {
        return Err(Error::Design(format!(
            "{} zeros for {} pole pairs",
            z.len(),
            ppairs.len()
        )));
    }
    // closest to the unit circle first
    ppairs.sort_by(|a, b| {
        let ra = 1.0 - a[0].norm().max(a[1].norm());
        let rb = 1.0 - b[0].norm().max(b[1].norm());
        ra.total_cmp(&rb)
    });
    // complex zeros go to the nearest pole pairs, highest Q first
    let mut zeros: Vec<Option<[Complex64; 2]>> = vec![None; ppairs.len()];
    for (slot, pp) in zeros.iter_mut().zip(&ppairs) {
        let q = if pp[0].im >= 0.0 { pp[0] } else { pp[1] };
        let best = zc
            .iter()
            .enumerate()
            .map(|(i, c)| (i, (q - c).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match best {
            Some((i, _)) => {
                let c = zc.swap_remove(i);
                *slot = Some([c, c.conj()]);
            }
            None => break,
        }
    }
    // real zeros: those near z = 1 go to the lowest-frequency poles, so each
    // section is a high-pass or low-pass shape with gain near 1 in band
    let mut rest: Vec<usize> = (0..ppairs.len()).filter(|&i| zeros[i].is_none()).collect();
    rest.sort_by(|&i, &j| {
        let fi = ppairs[i][0].arg().abs();
        let fj = ppairs[j][0].arg().abs();
        fi.total_cmp(&fj)
    });
    zr.sort_by(|a, b| b.total_cmp(a));
    if rest.len() * 2 != zr.len() {
        return Err(Error::Design("zero and pole counts disagree".into()));
    }
    for (k, &i) in rest.iter().enumerate() {
        zeros[i] = Some([
            Complex64::new(zr[2 * k], 0.0),
            Complex64::new(zr[2 * k + 1], 0.0),
        ]);
    }
    let mut sections = Vec::with_capacity(ppairs.len());
    for (pp, zp) in ppairs.iter().zip(zeros) {
        let zp = zp.expect("every pole pair received zeros");
        let [b1, b2] = poly2(&zp);
        let a = poly2(pp);
        let mut s = SecondOrderSection { b: [1.0, b1, b2], a };
        let g = peak_gain(&s, pp);
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::Design("section has zero gain".into()));
        }
        s.b.iter_mut().for_each(|v| *v /= g);
        sections.push(s);
    }
    sections.reverse();
    let at_centre: f64 = sections.iter().map(|s| s.response(zinv_center).norm()).product();
    if !(at_centre.is_finite() && at_centre > 0.0) {
        return Err(Error::Design("cascade has zero gain at band centre".into()));
    }
    // overall gain goes last so intermediate signals stay bounded by the input
    if let Some(last) = sections.last_mut() {
        last.b.iter_mut().for_each(|v| *v *= gain / at_centre);
    }
    Ok(sections)
}

fn design_order(spec: &FilterSpec, fs: f64, n: usize) -> Result<FilterCoefficients> {
    let b = band(spec, fs);
    let proto = prototype(spec, n, b.nat);
    let (z, p) = digital_roots(&proto, &b, fs);
    let radius = p.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if radius >= 1.0 {
        return Err(Error::Design(format!(
            "order {n} design has a pole at radius {radius}"
        )));
    }
    // digital image of the analog centre frequency w0
    let fc = fs / PI * (b.w0 / (2.0 * fs)).atan();
    let zinv = Complex64::from_polar(1.0, -2.0 * PI * fc / fs);
    let sections = to_sections(&z, &p, proto.dc_gain(), zinv)?;
    Ok(FilterCoefficients::Iir { sections })
}

pub(super) fn design(spec: &FilterSpec, fs: f64) -> Result<FilterCoefficients> {
    let n0 = iir_min_order(spec, fs)?;
    if n0 > MAX_PROTOTYPE_ORDER {
        return Err(Error::Design(format!(
            "{} needs prototype order {n0}, above the limit {MAX_PROTOTYPE_ORDER}",
            spec.family
        )));
    }
    let mut last = None;
    for n in n0..=(n0 + ORDER_SLACK).min(MAX_PROTOTYPE_ORDER) {
        let c = design_order(spec, fs, n)?;
        let r = check_compliance(&c, spec, fs, spec.stopband1_hz, spec.stopband2_hz);
        if r.ok {
            if n > n0 {
                log::info!("{} order raised from {n0} to {n} to meet tolerance", spec.family);
            }
            return Ok(c);
        }
        last = Some(r);
    }
    let r = last.expect("loop runs at least once");
    Err(Error::Design(format!(
        "{} cannot meet spec: achieved {:.1} dB stopband attenuation, {:.2} dB passband deviation",
        spec.family, r.min_stop_atten_db, r.max_pass_dev_db
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimum_orders_for_default_spec() {
        let fs = 250.0;
        let ord = |f| iir_min_order(&FilterSpec::with_family(f), fs).unwrap();
        assert_eq!(ord(FilterFamily::IirElliptic), 9);
        assert_eq!(ord(FilterFamily::IirChebyshev1), 23);
        assert_eq!(ord(FilterFamily::IirChebyshev2), 23);
        assert_eq!(ord(FilterFamily::IirButterworth), 120);
        assert!(ord(FilterFamily::IirElliptic) < ord(FilterFamily::IirChebyshev1));
    }

    #[test]
    fn butterworth_prototype_edge_loss() {
        let z = butterworth(5, 1.0);
        let h: Complex64 = z.p.iter().map(|p| Complex64::new(0.0, 1.0) - p).product();
        let loss = -20.0 * (z.k / h.norm()).log10();
        assert!((loss - 1.0).abs() < 1e-10);
    }

    #[test]
    fn elliptic_prototype_levels() {
        // passband edge loss = rp; stopband edge loss >= rs
        let (rp, rs) = (1.0, 60.0);
        for n in [3usize, 4, 9] {
            let z = elliptic(n, rp, rs);
            let resp = |w: f64| {
                let s = Complex64::new(0.0, w);
                let num: Complex64 = z.z.iter().map(|q| s - q).product();
                let den: Complex64 = z.p.iter().map(|q| s - q).product();
                (num / den * z.k).norm()
            };
            let edge = -20.0 * resp(1.0).log10();
            assert!((edge - rp).abs() < 1e-6, "n={n} edge {edge}");
            assert!(z.p.iter().all(|p| p.re < 0.0));
        }
    }

    #[test]
    fn chebyshev1_ripple_level() {
        for n in [3usize, 4] {
            let z = chebyshev1(n, 1.0);
            let s = Complex64::new(0.0, 1.0);
            let den: Complex64 = z.p.iter().map(|q| s - q).product();
            let loss = -20.0 * (z.k / den.norm()).log10();
            assert!((loss - 1.0).abs() < 1e-9);
        }
    }
}
