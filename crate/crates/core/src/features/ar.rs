//! Yule-Walker autoregressive spectrum.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::{FreqRange, Spectrum};
use crate::{Error, Result};

/// AR coefficients `a[1..=p]` of `A(z) = 1 + sum a[k] z^-k` and the final
/// prediction-error variance, from the biased autocorrelation of the
/// mean-removed signal via Levinson-Durbin.
pub fn yule_ar_coefficients(x: &[f64], order: usize) -> Result<(Vec<f64>, f64)> {
    if order == 0 {
        return Err(Error::param("ar_order", "must be at least 1"));
    }
    if order >= x.len() {
        return Err(Error::param(
            "ar_order",
            format!("{order} must be below the signal length {}", x.len()),
        ));
    }
    let n = x.len() as f64;
    let m = crate::linalg::mean(x);
    let xc: Vec<f64> = x.iter().map(|v| v - m).collect();
    let r: Vec<f64> = (0..=order)
        .map(|k| xc[..xc.len() - k].iter().zip(&xc[k..]).map(|(a, b)| a * b).sum::<f64>() / n)
        .collect();
    let scale = xc.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if r[0] <= f64::EPSILON * scale * scale || r[0] == 0.0 {
        return Err(Error::Numerical("constant signal has zero variance".into()));
    }
    let mut a: Vec<f64> = Vec::with_capacity(order);
    let mut err = r[0];
    for i in 1..=order {
        let acc = r[i] + (1..i).map(|j| a[j - 1] * r[i - j]).sum::<f64>();
        let k = -acc / err;
        let prev = a.clone();
        for j in 1..i {
            a[j - 1] = prev[j - 1] + k * prev[i - j - 1];
        }
        a.push(k);
        err *= 1.0 - k * k;
        if err <= 0.0 {
            return Err(Error::Numerical(format!(
                "autocorrelation not positive definite at lag {i}"
            )));
        }
    }
    Ok((a, err))
}

/// `sigma^2 / |A(e^{jw})|^2` on the one-sided `nfft` grid.
pub fn yule_ar_psd(x: &[f64], fs: f64, order: usize, nfft: usize, range: FreqRange) -> Result<Spectrum> {
    if nfft < 2 {
        return Err(Error::param("nfft", "must be at least 2"));
    }
    let (a, sigma2) = yule_ar_coefficients(x, order)?;
    let bins = nfft / 2 + 1;
    let freqs: Vec<f64> = (0..bins).map(|k| k as f64 * fs / nfft as f64).collect();
    let values = (0..bins)
        .map(|k| {
            let w = 2.0 * PI * k as f64 / nfft as f64;
            let den: Complex64 = a
                .iter()
                .enumerate()
                .map(|(i, &ai)| Complex64::from_polar(ai, -w * (i + 1) as f64))
                .sum::<Complex64>()
                + 1.0;
            sigma2 / den.norm_sqr()
        })
        .collect();
    Spectrum::new(values, freqs, "yule_ar", format!("order={order} nfft={nfft}")).restrict(range)
}
