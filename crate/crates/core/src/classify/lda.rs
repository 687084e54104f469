//! Linear discriminant analysis with a shared, ridge-regularized covariance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::{Error, Result};

/// Relative ridge added to the pooled covariance diagonal.
const RIDGE: f64 = 1e-6;

/// Per-class linear scores `w_c . x + b_c` with `w_c = S^-1 mu_c` and
/// `b_c = -1/2 mu_c^T S^-1 mu_c` (equal priors).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lda {
    pub weights: Matrix,
    pub biases: Vec<f64>,
    pub means: Matrix,
}

pub fn lda_train(x: &Matrix, y: &[usize], n_classes: usize) -> Result<Lda> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: y.len(),
        });
    }
    let p = x.ncols();
    let mut counts = vec![0usize; n_classes];
    let mut means = DMatrix::<f64>::zeros(n_classes, p);
    for (r, &c) in x.rows().zip(y) {
        if c >= n_classes {
            return Err(Error::IndexOutOfRange { index: c, len: n_classes });
        }
        counts[c] += 1;
        for j in 0..p {
            means[(c, j)] += r[j];
        }
    }
    if let Some(c) = counts.iter().position(|&n| n < 2) {
        return Err(Error::InsufficientData(format!(
            "LDA needs at least 2 samples per class; class {c} has {}",
            counts[c]
        )));
    }
    for c in 0..n_classes {
        let n = counts[c] as f64;
        means.row_mut(c).scale_mut(1.0 / n);
    }
    let mut cov = DMatrix::<f64>::zeros(p, p);
    for (r, &c) in x.rows().zip(y) {
        let d = DVector::from_iterator(p, r.iter().enumerate().map(|(j, v)| v - means[(c, j)]));
        cov.ger(1.0, &d, &d, 1.0);
    }
    let dof = (x.nrows() - n_classes).max(1) as f64;
    cov /= dof;
    let mean_diag = cov.trace() / p as f64;
    let eps = RIDGE * if mean_diag > 0.0 { mean_diag } else { 1.0 };
    for i in 0..p {
        cov[(i, i)] += eps;
    }
    let rhs = means.transpose();
    let w = match cov.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => cov
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("pooled covariance is singular".into()))?,
    };
    let biases = (0..n_classes)
        .map(|c| -0.5 * means.row(c).dot(&w.column(c).transpose()))
        .collect();
    Ok(Lda {
        weights: Matrix::from_dmatrix(&w.transpose()),
        biases,
        means: Matrix::from_dmatrix(&means),
    })
}

impl Lda {
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.weights.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.ncols(),
                actual: x.len(),
            });
        }
        Ok(self
            .weights
            .rows()
            .zip(&self.biases)
            .map(|(w, b)| crate::linalg::dot(w, x) + b)
            .collect())
    }

    /// Two-class discriminant `w = S^-1 (mu_1 - mu_0)` with
    /// `b = 1/2 (T - mu_0^T S^-1 mu_0 + mu_1^T S^-1 mu_1)`; class 1 when
    /// `w . x > b`.
    pub fn binary(&self, threshold: f64) -> Result<(Vec<f64>, f64)> {
        if self.weights.nrows() != 2 {
            return Err(Error::param("lda", "binary form needs exactly two classes"));
        }
        let (w0, w1) = (self.weights.row(0), self.weights.row(1));
        let w: Vec<f64> = w1.iter().zip(w0).map(|(a, b)| a - b).collect();
        let q0 = crate::linalg::dot(self.means.row(0), w0);
        let q1 = crate::linalg::dot(self.means.row(1), w1);
        Ok((w, 0.5 * (threshold - q0 + q1)))
    }
}
