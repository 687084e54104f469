//! k-nearest-neighbour majority vote under the Euclidean distance.

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub train: Matrix,
    pub labels: Vec<usize>,
    pub k: usize,
    pub n_classes: usize,
}

pub fn knn_train(x: &Matrix, y: &[usize], n_classes: usize, k: usize) -> Result<Knn> {
    if k == 0 || k > x.nrows() {
        return Err(Error::param(
            "clf.k",
            format!("must be in 1..={}, got {k}", x.nrows()),
        ));
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: y.len(),
        });
    }
    if let Some(&c) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::IndexOutOfRange { index: c, len: n_classes });
    }
    Ok(Knn {
        train: x.clone(),
        labels: y.to_vec(),
        k,
        n_classes,
    })
}

impl Knn {
    /// Indices of the `k` nearest training rows, ordered by
    /// (distance, index).
    pub fn neighbours(&self, x: &[f64]) -> Result<Vec<usize>> {
        if x.len() != self.train.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.train.ncols(),
                actual: x.len(),
            });
        }
        let mut d: Vec<(f64, usize)> = self
            .train
            .rows()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum(), i))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(d.into_iter().take(self.k).map(|p| p.1).collect())
    }

    /// Vote fraction per class.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut votes = vec![0.0; self.n_classes];
        for i in self.neighbours(x)? {
            votes[self.labels[i]] += 1.0 / self.k as f64;
        }
        Ok(votes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::argmax;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn trivial_cases() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [10.0], [11.0]]).unwrap();
        let y = [0, 0, 1, 1, 1];
        let m1 = knn_train(&x, &y, 2, 1).unwrap();
        for (r, &c) in x.rows().zip(&y) {
            assert_eq!(argmax(&m1.scores(r).unwrap()), c);
        }
        let all = knn_train(&x, &y, 2, 5).unwrap();
        assert_eq!(argmax(&all.scores(&[-100.0]).unwrap()), 1);
        assert!(knn_train(&x, &y, 2, 6).is_err());
    }

    #[test]
    fn matches_sorted_distance_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<[f64; 3]> = (0..50).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
        let y: Vec<usize> = (0..50).map(|_| rng.random_range(0..3)).collect();
        let m = knn_train(&Matrix::from_rows(&rows).unwrap(), &y, 3, 5).unwrap();
        for _ in 0..100 {
            let q: [f64; 3] = [rng.random(), rng.random(), rng.random()];
            let mut d: Vec<(f64, usize)> = rows
                .iter()
                .enumerate()
                .map(|(i, r)| ((0..3).map(|j| (r[j] - q[j]).powi(2)).sum::<f64>().sqrt(), i))
                .collect();
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut votes = [0usize; 3];
            for &(_, i) in &d[..5] {
                votes[y[i]] += 1;
            }
            let best = (0..3).max_by(|&a, &b| votes[a].cmp(&votes[b]).then(b.cmp(&a))).unwrap();
            assert_eq!(argmax(&m.scores(&q).unwrap()), best);
        }
    }
}
