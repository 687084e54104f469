//! Gaussian naive Bayes.

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::{Error, Result};

const VAR_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayes {
    pub means: Matrix,
    pub variances: Matrix,
    pub log_priors: Vec<f64>,
}

pub fn naive_bayes_train(x: &Matrix, y: &[usize], n_classes: usize) -> Result<NaiveBayes> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: y.len(),
        });
    }
    let p = x.ncols();
    let mut counts = vec![0usize; n_classes];
    let mut means = Matrix::zeros(n_classes, p);
    for (r, &c) in x.rows().zip(y) {
        if c >= n_classes {
            return Err(Error::IndexOutOfRange { index: c, len: n_classes });
        }
        counts[c] += 1;
        for (m, v) in means.row_mut(c).iter_mut().zip(r) {
            *m += v;
        }
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::InsufficientData(format!("class {c} has no training samples")));
    }
    for c in 0..n_classes {
        let n = counts[c] as f64;
        means.row_mut(c).iter_mut().for_each(|m| *m /= n);
    }
    let mut variances = Matrix::zeros(n_classes, p);
    for (r, &c) in x.rows().zip(y) {
        let mu = means.row(c).to_vec();
        for ((v, a), m) in variances.row_mut(c).iter_mut().zip(r).zip(&mu) {
            *v += (a - m).powi(2);
        }
    }
    for c in 0..n_classes {
        let n = counts[c] as f64;
        variances
            .row_mut(c)
            .iter_mut()
            .for_each(|v| *v = (*v / n).max(VAR_FLOOR));
    }
    let total = y.len() as f64;
    Ok(NaiveBayes {
        means,
        variances,
        log_priors: counts.iter().map(|&n| (n as f64 / total).ln()).collect(),
    })
}

impl NaiveBayes {
    pub fn log_joint(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.means.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.means.ncols(),
                actual: x.len(),
            });
        }
        Ok((0..self.log_priors.len())
            .map(|c| {
                self.log_priors[c]
                    + self
                        .means
                        .row(c)
                        .iter()
                        .zip(self.variances.row(c))
                        .zip(x)
                        .map(|((m, v), a)| {
                            -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (a - m).powi(2) / v)
                        })
                        .sum::<f64>()
            })
            .collect())
    }

    /// Posterior class probabilities.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(super::softmax(&self.log_joint(x)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::argmax;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn blobs(n: usize, seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = [[0.0, 0.0], [8.0, 0.0], [0.0, 8.0]];
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for (c, m) in centers.iter().enumerate() {
            for _ in 0..n {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                rows.push([m[0] + a, m[1] + b]);
                y.push(c);
            }
        }
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn separated_blobs() {
        let (x, y) = blobs(1000, 1);
        let m = naive_bayes_train(&x, &y, 3).unwrap();
        let (tx, ty) = blobs(1000, 2);
        let hits = tx.rows().zip(&ty).filter(|(r, &c)| argmax(&m.scores(r).unwrap()) == c).count();
        assert!(hits as f64 / 3000.0 >= 0.99);
    }

    #[test]
    fn midpoint_boundary() {
        let offsets = [-1.0, -0.3, 0.2, 1.1];
        let rows: Vec<[f64; 1]> = offsets.iter().map(|o| [2.0 + o]).chain(offsets.iter().map(|o| [6.0 + o])).collect();
        let y = [0, 0, 0, 0, 1, 1, 1, 1];
        let m = naive_bayes_train(&Matrix::from_rows(&rows).unwrap(), &y, 2).unwrap();
        let mid = 2.0 + 0.0 + (6.0 - 2.0) / 2.0 + offsets.iter().sum::<f64>() / 4.0;
        let lj = m.log_joint(&[mid]).unwrap();
        assert!((lj[0] - lj[1]).abs() < 1e-6);
        assert_eq!(argmax(&m.scores(&[mid - 1e-3]).unwrap()), 0);
        assert_eq!(argmax(&m.scores(&[mid + 1e-3]).unwrap()), 1);
    }

    #[test]
    fn posteriors_normalized() {
        let (x, y) = blobs(20, 3);
        let m = naive_bayes_train(&x, &y, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let q = [rng.random::<f64>() * 40.0 - 20.0, rng.random::<f64>() * 40.0 - 20.0];
            let s: f64 = m.scores(&q).unwrap().iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }
}
