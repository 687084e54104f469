//! Haar discrete wavelet transform (Mallat filter bank).

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Multi-level Haar decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletCoefficients {
    /// Approximation at the coarsest level `L`.
    pub approximation: Vec<f64>,
    /// Detail coefficients, `details[0]` is level 1 (finest).
    pub details: Vec<Vec<f64>>,
    pub wavelet: String,
    pub levels: usize,
    /// Zeros appended so the length is a multiple of `2^L`.
    pub padded: usize,
}

impl WaveletCoefficients {
    /// `[cA_L, cD_L, ..., cD_1]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = self.approximation.clone();
        for d in self.details.iter().rev() {
            out.extend_from_slice(d);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.approximation.len() + self.details.iter().map(Vec::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Number of coefficients produced for an input of length `n`.
pub fn dwt_len(n: usize, levels: usize) -> usize {
    let block = 1usize << levels;
    n.div_ceil(block) * block
}

/// `levels`-level Haar DWT; `x` is zero-padded to a multiple of `2^levels`.
pub fn dwt(x: &[f64], wavelet: &str, levels: usize) -> Result<WaveletCoefficients> {
    let w = wavelet.trim().to_ascii_lowercase();
    if w != "haar" && w != "db1" {
        return Err(Error::param(
            "wavelet",
            format!("unsupported wavelet `{wavelet}` (haar/db1 only)"),
        ));
    }
    if levels == 0 || levels >= usize::BITS as usize {
        return Err(Error::param("levels", "must be at least 1"));
    }
    if x.is_empty() {
        return Err(Error::InsufficientData("empty signal".into()));
    }
    let total = dwt_len(x.len(), levels);
    let padded = total - x.len();
    let mut a: Vec<f64> = x.iter().copied().chain(std::iter::repeat_n(0.0, padded)).collect();
    let mut details = Vec::with_capacity(levels);
    for _ in 0..levels {
        let (na, nd): (Vec<f64>, Vec<f64>) = a
            .chunks_exact(2)
            .map(|p| ((p[0] + p[1]) * FRAC_1_SQRT_2, (p[0] - p[1]) * FRAC_1_SQRT_2))
            .unzip();
        details.push(nd);
        a = na;
    }
    Ok(WaveletCoefficients {
        approximation: a,
        details,
        wavelet: "haar".into(),
        levels,
        padded,
    })
}

/// Inverse of [`dwt`], dropping the padding.
pub fn idwt(c: &WaveletCoefficients) -> Vec<f64> {
    let mut a = c.approximation.clone();
    for d in c.details.iter().rev() {
        a = a
            .iter()
            .zip(d)
            .flat_map(|(s, t)| [(s + t) * FRAC_1_SQRT_2, (s - t) * FRAC_1_SQRT_2])
            .collect();
    }
    a.truncate(a.len() - c.padded);
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_and_constant_signal() {
        let c = dwt(&[2.0; 64], "db1", 5).unwrap();
        assert_eq!(c.approximation.len(), 2);
        assert_eq!(c.details[0].len(), 32);
        assert_eq!(c.details[4].len(), 2);
        assert!(c.details.iter().flatten().all(|&v| v.abs() < 1e-12));
        assert_eq!(c.to_vec().len(), 64);
    }

    #[test]
    fn padding_recorded() {
        let c = dwt(&[1.0; 1250], "haar", 5).unwrap();
        assert_eq!(c.padded, 1280 - 1250);
        assert_eq!(c.len(), dwt_len(1250, 5));
        assert_eq!(idwt(&c).len(), 1250);
    }

    #[test]
    fn errors() {
        assert!(dwt(&[1.0; 8], "haar", 0).is_err());
        assert!(dwt(&[1.0; 8], "db4", 1).is_err());
    }

    proptest! {
        #[test]
        fn perfect_reconstruction_and_energy(
            x in prop::collection::vec(-50.0f64..50.0, 64),
            levels in 1usize..=6,
        ) {
            let c = dwt(&x, "haar", levels).unwrap();
            let back = idwt(&c);
            let scale = x.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
            for (a, b) in back.iter().zip(&x) {
                prop_assert!((a - b).abs() <= 1e-10 * scale);
            }
            let e1: f64 = x.iter().map(|v| v * v).sum();
            let e2: f64 = c.to_vec().iter().map(|v| v * v).sum();
            prop_assert!((e1 - e2).abs() <= 1e-10 * e1.max(1e-300));
        }
    }
}
