//! PCA and truncated-SVD projections fitted on training rows.

use std::hash::{Hash, Hasher};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::{sorted_svd, sorted_symmetric_eigen, Matrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionKind {
    Pca,
    Svd,
}

/// Orthonormal basis `[n_features x d]`; rows are projected as
/// `(x - center) basis`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub kind: ProjectionKind,
    pub basis: Matrix,
    pub d: usize,
    /// PCA only.
    pub center: Option<Vec<f64>>,
    /// Eigenvalues (PCA) or singular values (SVD), non-increasing.
    pub values: Vec<f64>,
}

/// Flips each column so its largest-magnitude entry is positive.
fn fix_signs(v: &mut DMatrix<f64>) {
    for mut c in v.column_iter_mut() {
        let big = c.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if big < 0.0 {
            c.neg_mut();
        }
    }
}

fn check_d(d: usize, max: usize, what: &str) -> Result<()> {
    if d == 0 || d > max {
        return Err(Error::param(
            "select.d",
            format!("{d} must be in 1..={max} ({what})"),
        ));
    }
    Ok(())
}

/// Top-`d` eigenvectors of the mean-centred training covariance.
pub fn pca_fit(x: &Matrix, d: usize) -> Result<Projection> {
    if x.nrows() < 2 {
        return Err(Error::InsufficientData("PCA needs at least two rows".into()));
    }
    check_d(d, x.ncols(), "number of features")?;
    let mut m = x.to_dmatrix();
    let center: Vec<f64> = m.column_iter().map(|c| c.mean()).collect();
    for (j, mut c) in m.column_iter_mut().enumerate() {
        c.add_scalar_mut(-center[j]);
    }
    let cov = m.transpose() * &m / (x.nrows() - 1) as f64;
    let (vals, vecs) = sorted_symmetric_eigen(&cov);
    let mut basis = vecs.columns(0, d).into_owned();
    fix_signs(&mut basis);
    Ok(Projection {
        kind: ProjectionKind::Pca,
        basis: Matrix::from_dmatrix(&basis),
        d,
        center: Some(center),
        values: vals.iter().take(d).map(|v| v.max(0.0)).collect(),
    })
}

/// Top-`d` right singular vectors of the (uncentred) training matrix.
pub fn svd_fit(x: &Matrix, d: usize) -> Result<Projection> {
    check_d(d, x.nrows().min(x.ncols()), "min(trials, features)")?;
    let (_, s, v) = sorted_svd(&x.to_dmatrix())?;
    let mut basis = v.columns(0, d).into_owned();
    fix_signs(&mut basis);
    Ok(Projection {
        kind: ProjectionKind::Svd,
        basis: Matrix::from_dmatrix(&basis),
        d,
        center: None,
        values: s.iter().take(d).copied().collect(),
    })
}

impl Projection {
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        let b = self.basis.to_dmatrix();
        if x.ncols() != b.nrows() {
            return Err(Error::DimensionMismatch {
                expected: b.nrows(),
                actual: x.ncols(),
            });
        }
        let mut m = x.to_dmatrix();
        if let Some(c) = &self.center {
            for (j, mut col) in m.column_iter_mut().enumerate() {
                col.add_scalar_mut(-c[j]);
            }
        }
        Ok(Matrix::from_dmatrix(&(m * b)))
    }

    /// Maps projected rows back to feature space.
    pub fn inverse(&self, z: &Matrix) -> Result<Matrix> {
        let b = self.basis.to_dmatrix();
        if z.ncols() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                actual: z.ncols(),
            });
        }
        let mut m = z.to_dmatrix() * b.transpose();
        if let Some(c) = &self.center {
            for (j, mut col) in m.column_iter_mut().enumerate() {
                col.add_scalar_mut(c[j]);
            }
        }
        Ok(Matrix::from_dmatrix(&m))
    }

    /// Hash of the basis and centre bits; equal across applications of
    /// one fitted projection.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for v in self.basis.as_slice() {
            v.to_bits().hash(&mut h);
        }
        if let Some(c) = &self.center {
            for v in c {
                v.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }
}
