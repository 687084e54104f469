//! Blind source separation for artifact removal: AMUSE and FastICA, with
//! back-projection of a retained component subset.
//!
//! Observations `r` are `[n_channels x n_samples]`. Row means are removed
//! before decomposition and restored on reconstruction, so
//! `components = W (r - mean)`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::{pseudo_inverse, sorted_svd, sorted_symmetric_eigen, Matrix};
use crate::{Error, Result};

/// `E[log cosh(v)]` and `Var[log cosh(v)]` for a standard normal `v`.
const GAUSS_LOGCOSH_MEAN: f64 = 0.374_567_207_491_47;
const GAUSS_LOGCOSH_VAR: f64 = 0.189_767_449_172_37;
/// |z| below this marks a component as indistinguishable from Gaussian.
const GAUSSIAN_Z: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BssMethod {
    Amuse,
    FastIca,
}

/// Result of a source separation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BssDecomposition {
    /// `[n_comp x n_channels]`.
    pub unmixing: Matrix,
    /// `[n_comp x n_samples]`.
    pub components: Matrix,
    pub method: BssMethod,
    /// Row means removed from the observations.
    pub channel_means: Vec<f64>,
    /// AMUSE: singular value attached to each component, non-increasing.
    pub singular_values: Option<Vec<f64>>,
    /// FastICA: whether the fixed-point iteration met the tolerance.
    pub converged: bool,
    pub iterations: usize,
    /// FastICA: components whose negentropy is not significantly above zero.
    pub gaussian_components: Vec<bool>,
}

impl BssDecomposition {
    pub fn n_components(&self) -> usize {
        self.unmixing.nrows()
    }

    /// True when ICA did not converge or produced a near-Gaussian
    /// component, i.e. the separation is not trustworthy.
    pub fn flagged(&self) -> bool {
        !self.converged || self.gaussian_components.iter().any(|&g| g)
    }
}

/// 1-based inclusive component range, e.g. `15..252`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeepRange {
    pub lo: usize,
    pub hi: usize,
}

impl KeepRange {
    pub fn new(lo: usize, hi: usize) -> Result<Self> {
        if lo == 0 || hi < lo {
            return Err(Error::param(
                "artifact.keep",
                format!("`{lo}..{hi}` must be a 1-based non-empty range"),
            ));
        }
        Ok(KeepRange { lo, hi })
    }

    /// 0-based indices, checked against `n_comp`.
    pub fn indices(&self, n_comp: usize) -> Result<Vec<usize>> {
        if self.hi > n_comp {
            return Err(Error::param(
                "artifact.keep",
                format!("{}..{} exceeds the {n_comp} available components", self.lo, self.hi),
            ));
        }
        Ok((self.lo - 1..self.hi).collect())
    }
}

impl std::str::FromStr for KeepRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::param("artifact.keep", format!("cannot parse `{s}` as lo..hi"));
        let (a, b) = s
            .split_once("..")
            .or_else(|| s.split_once('-'))
            .ok_or_else(bad)?;
        KeepRange::new(
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        )
    }
}

impl std::fmt::Display for KeepRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}..{}", self.lo, self.hi)
    }
}

fn centered(r: &Matrix) -> (DMatrix<f64>, Vec<f64>) {
    let means: Vec<f64> = r.rows().map(crate::linalg::mean).collect();
    let mut x = r.to_dmatrix();
    for (i, m) in means.iter().enumerate() {
        x.row_mut(i).add_scalar_mut(-m);
    }
    (x, means)
}

fn check_shape(r: &Matrix) -> Result<()> {
    if r.nrows() == 0 {
        return Err(Error::InsufficientData("no channels".into()));
    }
    if r.ncols() <= r.nrows() {
        return Err(Error::InsufficientData(format!(
            "{} samples for {} channels; need more samples than channels",
            r.ncols(),
            r.nrows()
        )));
    }
    if r.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::param("r", "non-finite sample"));
    }
    Ok(())
}

/// Symmetric inverse square root of the sample covariance, regularized
/// when rank deficient.
fn whitening(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    let t = x.ncols() as f64;
    let mut cov = x * x.transpose() / t;
    let eps = 1e-10 * cov.trace() / n as f64;
    if eps <= 0.0 {
        return Err(Error::Numerical("observations have zero variance".into()));
    }
    let (vals, _) = sorted_symmetric_eigen(&cov);
    if vals[n - 1] <= eps {
        log::warn!(
            "covariance is rank deficient (smallest eigenvalue {:e}); adding {eps:e} I",
            vals[n - 1]
        );
        for i in 0..n {
            cov[(i, i)] += eps;
        }
    }
    let (vals, vecs) = sorted_symmetric_eigen(&cov);
    let d = DMatrix::from_diagonal(&vals.map(|v| 1.0 / v.max(eps).sqrt()));
    Ok(&vecs * d * vecs.transpose())
}

/// AMUSE: whitening followed by the SVD of the symmetrized lag-1
/// covariance of the whitened data. Components come out ordered by
/// decreasing singular value.
pub fn amuse_decompose(r: &Matrix) -> Result<BssDecomposition> {
    check_shape(r)?;
    let (x, means) = centered(r);
    let q = whitening(&x)?;
    let y = &q * &x;
    let t = y.ncols();
    let c1 = y.columns(0, t - 1) * y.columns(1, t - 1).transpose() / (t - 1) as f64;
    let cs = (&c1 + c1.transpose()) * 0.5;
    let (u, s, _) = sorted_svd(&cs)?;
    let w = u.transpose() * &q;
    let z = &w * &x;
    Ok(BssDecomposition {
        unmixing: Matrix::from_dmatrix(&w),
        components: Matrix::from_dmatrix(&z),
        method: BssMethod::Amuse,
        channel_means: means,
        singular_values: Some(s.iter().copied().collect()),
        converged: true,
        iterations: 0,
        gaussian_components: vec![false; w.nrows()],
    })
}

/// FastICA parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FastIcaParams {
    pub n_comp: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl FastIcaParams {
    pub fn new(n_comp: usize) -> Self {
        FastIcaParams {
            n_comp,
            max_iter: 200,
            tol: 1e-6,
            seed: 0,
        }
    }
}

/// `(W W^T)^{-1/2} W`.
fn sym_decorrelate(w: &DMatrix<f64>) -> DMatrix<f64> {
    let (vals, vecs) = sorted_symmetric_eigen(&(w * w.transpose()));
    let d = DMatrix::from_diagonal(&vals.map(|v| 1.0 / v.max(1e-300).sqrt()));
    &vecs * d * vecs.transpose() * w
}

/// Symmetric FastICA with the `tanh` nonlinearity. Components are ordered
/// by decreasing norm of their mixing column, i.e. by the variance they
/// contribute to the observations.
pub fn fastica_decompose(r: &Matrix, params: &FastIcaParams) -> Result<BssDecomposition> {
    check_shape(r)?;
    let n_ch = r.nrows();
    if params.n_comp == 0 || params.n_comp > n_ch {
        return Err(Error::param(
            "n_comp",
            format!("must be in 1..={n_ch}, got {}", params.n_comp),
        ));
    }
    if params.max_iter == 0 || !(params.tol > 0.0) {
        return Err(Error::param("max_iter/tol", "must be positive"));
    }
    let (x, means) = centered(r);
    let t = x.ncols() as f64;
    let cov = &x * x.transpose() / t;
    let (vals, vecs) = sorted_symmetric_eigen(&cov);
    let k_rows = params.n_comp;
    let floor = 1e-10 * cov.trace() / n_ch as f64;
    if vals[k_rows - 1] <= floor {
        return Err(Error::Numerical(format!(
            "only {} significant principal components for n_comp = {k_rows}",
            vals.iter().filter(|&&v| v > floor).count()
        )));
    }
    // PCA whitening to n_comp dimensions
    let mut k = DMatrix::zeros(k_rows, n_ch);
    for i in 0..k_rows {
        let s = 1.0 / vals[i].sqrt();
        k.set_row(i, &(vecs.column(i).transpose() * s));
    }
    let z = &k * &x;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let init = DMatrix::from_fn(k_rows, k_rows, |_, _| StandardNormal.sample(&mut rng));
    let mut w = sym_decorrelate(&init);
    let mut converged = false;
    let mut iterations = params.max_iter;
    for it in 1..=params.max_iter {
        let wx = &w * &z;
        let g = wx.map(f64::tanh);
        let gp_mean = DVector::from_iterator(
            k_rows,
            g.row_iter()
                .map(|row| row.iter().map(|v| 1.0 - v * v).sum::<f64>() / t),
        );
        let w_new = sym_decorrelate(&(&g * z.transpose() / t - DMatrix::from_diagonal(&gp_mean) * &w));
        let lim = (0..k_rows)
            .map(|i| ((w_new.row(i) * w.row(i).transpose())[(0, 0)].abs() - 1.0).abs())
            .fold(0.0, f64::max);
        w = w_new;
        if lim < params.tol {
            converged = true;
            iterations = it;
            break;
        }
    }
    if !converged {
        log::warn!("FastICA did not converge in {} iterations", params.max_iter);
    }
    let unmix = &w * &k;
    let mixing = pseudo_inverse(&unmix, 1e-12)?;
    let mut order: Vec<usize> = (0..k_rows).collect();
    let norms: Vec<f64> = (0..k_rows).map(|i| mixing.column(i).norm()).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let mut unmix_sorted = DMatrix::zeros(k_rows, n_ch);
    for (dst, &src) in order.iter().enumerate() {
        unmix_sorted.set_row(dst, &unmix.row(src));
    }
    let comps = &unmix_sorted * &x;
    let gaussian = comps
        .row_iter()
        .map(|row| {
            let sd = (row.iter().map(|v| v * v).sum::<f64>() / t).sqrt().max(1e-300);
            let m = row.iter().map(|v| (v / sd).cosh().ln()).sum::<f64>() / t;
            let z = (m - GAUSS_LOGCOSH_MEAN) / (GAUSS_LOGCOSH_VAR / t).sqrt();
            z.abs() < GAUSSIAN_Z
        })
        .collect();
    Ok(BssDecomposition {
        unmixing: Matrix::from_dmatrix(&unmix_sorted),
        components: Matrix::from_dmatrix(&comps),
        method: BssMethod::FastIca,
        channel_means: means,
        singular_values: None,
        converged,
        iterations,
        gaussian_components: gaussian,
    })
}

fn mixing_for(d: &BssDecomposition, keep: &[usize]) -> Result<DMatrix<f64>> {
    if keep.is_empty() {
        return Err(Error::param("keep", "must select at least one component"));
    }
    let n_comp = d.n_components();
    if let Some(&bad) = keep.iter().find(|&&k| k >= n_comp) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            len: n_comp,
        });
    }
    pseudo_inverse(&d.unmixing.to_dmatrix(), 1e-12)
}

/// Back-projects the components listed in `keep` (0-based) and returns all
/// reconstructed channels, `r_hat = pinv(W) Z_keep + mean`.
pub fn reconstruct_all(d: &BssDecomposition, keep: &[usize]) -> Result<Matrix> {
    let pinv = mixing_for(d, keep)?;
    let comps = d.components.to_dmatrix();
    let mut r_hat = DMatrix::zeros(pinv.nrows(), comps.ncols());
    for &k in keep {
        r_hat += pinv.column(k) * comps.row(k);
    }
    for (i, m) in d.channel_means.iter().enumerate() {
        r_hat.row_mut(i).add_scalar_mut(*m);
    }
    Ok(Matrix::from_dmatrix(&r_hat))
}

/// Row `channel` of [`reconstruct_all`].
pub fn reconstruct(d: &BssDecomposition, keep: &[usize], channel: usize) -> Result<Vec<f64>> {
    let n_ch = d.unmixing.ncols();
    if channel >= n_ch {
        return Err(Error::IndexOutOfRange {
            index: channel,
            len: n_ch,
        });
    }
    let pinv = mixing_for(d, keep)?;
    let mut out = vec![d.channel_means[channel]; d.components.ncols()];
    for &k in keep {
        let a = pinv[(channel, k)];
        for (o, z) in out.iter_mut().zip(d.components.row(k)) {
            *o += a * z;
        }
    }
    Ok(out)
}
