//! Kernel functions for the SVM. Distance-based kernels take the form
//! `exp(-gamma d(x, y)^2)` and similarity-based ones `exp(-gamma (1 - s)^2)`.

use serde::{Deserialize, Serialize};

use crate::linalg::{average_ranks, Matrix};
use crate::{Error, Result};

/// Added to chi-square denominators.
const CHI_EPS: f64 = 1e-12;
pub const DEFAULT_MINKOWSKI_P: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Linear,
    Rbf,
    ChiSquare,
    StandardizedEuclidean,
    Cityblock,
    Minkowski,
    Chebyshev,
    Cosine,
    Correlation,
    Spearman,
}

impl KernelKind {
    pub const ALL: [KernelKind; 10] = [
        KernelKind::Linear,
        KernelKind::Rbf,
        KernelKind::ChiSquare,
        KernelKind::StandardizedEuclidean,
        KernelKind::Cityblock,
        KernelKind::Minkowski,
        KernelKind::Chebyshev,
        KernelKind::Cosine,
        KernelKind::Correlation,
        KernelKind::Spearman,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            KernelKind::Linear => "linear",
            KernelKind::Rbf => "rbf",
            KernelKind::ChiSquare => "chi_square",
            KernelKind::StandardizedEuclidean => "standardized_euclidean",
            KernelKind::Cityblock => "cityblock",
            KernelKind::Minkowski => "minkowski",
            KernelKind::Chebyshev => "chebyshev",
            KernelKind::Cosine => "cosine",
            KernelKind::Correlation => "correlation",
            KernelKind::Spearman => "spearman",
        }
    }

    fn similarity(&self) -> bool {
        matches!(
            self,
            KernelKind::Cosine | KernelKind::Correlation | KernelKind::Spearman
        )
    }
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        Ok(match key.as_str() {
            "linear" => KernelKind::Linear,
            "rbf" | "gaussian" | "euclidean" => KernelKind::Rbf,
            "chi_square" | "chisquare" | "chi2" => KernelKind::ChiSquare,
            "standardized_euclidean" | "seuclidean" => KernelKind::StandardizedEuclidean,
            "cityblock" | "manhattan" => KernelKind::Cityblock,
            "minkowski" => KernelKind::Minkowski,
            "chebyshev" => KernelKind::Chebyshev,
            "cosine" => KernelKind::Cosine,
            "correlation" => KernelKind::Correlation,
            "spearman" => KernelKind::Spearman,
            _ => return Err(Error::param("clf.kernel", format!("unknown kernel `{s}`"))),
        })
    }
}

impl std::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Kernel choice; `gamma = None` means `1 / n_features`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub gamma: Option<f64>,
    /// Minkowski exponent.
    pub p: f64,
}

impl KernelSpec {
    pub fn new(kind: KernelKind) -> Self {
        KernelSpec {
            kind,
            gamma: None,
            p: DEFAULT_MINKOWSKI_P,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::param("clf.gamma", format!("must be positive, got {g}")));
            }
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::param("clf.p", format!("Minkowski p must be >= 1, got {}", self.p)));
        }
        Ok(())
    }

    /// Binds data-dependent parameters from the training rows.
    pub fn fit(&self, train: &Matrix) -> Result<Kernel> {
        self.validate()?;
        let nf = train.ncols();
        if nf == 0 {
            return Err(Error::InsufficientData("no features".into()));
        }
        let scales = if self.kind == KernelKind::StandardizedEuclidean {
            let n = train.nrows() as f64;
            (0..nf)
                .map(|j| {
                    let c = train.column(j);
                    let m = c.iter().sum::<f64>() / n;
                    let v = c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
                    if v > 0.0 { 1.0 / v } else { 1.0 }
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(Kernel {
            kind: self.kind,
            gamma: self.gamma.unwrap_or(1.0 / nf as f64),
            p: self.p,
            inv_var: scales,
            n_features: nf,
        })
    }
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::new(KernelKind::Linear)
    }
}

/// A kernel with all parameters resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub kind: KernelKind,
    pub gamma: f64,
    pub p: f64,
    /// Standardized Euclidean only: reciprocal training variances.
    pub inv_var: Vec<f64>,
    pub n_features: usize,
}

/// Unit-norm, optionally centred (on ranks for Spearman) copy of a row.
fn normalized(x: &[f64], kind: KernelKind) -> Vec<f64> {
    let mut v = match kind {
        KernelKind::Spearman => average_ranks(x),
        _ => x.to_vec(),
    };
    if kind != KernelKind::Cosine {
        let m = crate::linalg::mean(&v);
        v.iter_mut().for_each(|a| *a -= m);
    }
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|a| *a /= n);
    }
    v
}

impl Kernel {
    /// Row transform applied once before pairwise evaluation.
    pub fn prepare(&self, x: &[f64]) -> Vec<f64> {
        if self.kind.similarity() {
            normalized(x, self.kind)
        } else {
            x.to_vec()
        }
    }

    /// Kernel value between two prepared rows.
    pub fn eval_prepared(&self, a: &[f64], b: &[f64]) -> f64 {
        let g = self.gamma;
        let d2 = match self.kind {
            KernelKind::Linear => return crate::linalg::dot(a, b),
            KernelKind::Cosine | KernelKind::Correlation | KernelKind::Spearman => {
                let s = crate::linalg::dot(a, b);
                (1.0 - s).powi(2)
            }
            KernelKind::Rbf => a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum(),
            KernelKind::StandardizedEuclidean => a
                .iter()
                .zip(b)
                .zip(&self.inv_var)
                .map(|((x, y), w)| (x - y).powi(2) * w)
                .sum(),
            KernelKind::ChiSquare => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).powi(2) / (x + y + CHI_EPS).abs().max(CHI_EPS))
                .sum(),
            KernelKind::Cityblock => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>().powi(2),
            KernelKind::Minkowski => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs().powf(self.p))
                .sum::<f64>()
                .powf(1.0 / self.p)
                .powi(2),
            KernelKind::Chebyshev => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
                .powi(2),
        };
        (-g * d2).exp()
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        self.eval_prepared(&self.prepare(a), &self.prepare(b))
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        if x.ncols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: x.ncols(),
            });
        }
        Ok(())
    }

    /// `K[i, j] = k(x1_i, x2_j)`.
    pub fn matrix(&self, x1: &Matrix, x2: &Matrix) -> Result<Matrix> {
        self.check(x1)?;
        self.check(x2)?;
        let p1: Vec<Vec<f64>> = x1.rows().map(|r| self.prepare(r)).collect();
        let p2: Vec<Vec<f64>> = x2.rows().map(|r| self.prepare(r)).collect();
        let mut k = Matrix::zeros(x1.nrows(), x2.nrows());
        for (i, a) in p1.iter().enumerate() {
            let row = k.row_mut(i);
            for (j, b) in p2.iter().enumerate() {
                row[j] = self.eval_prepared(a, b);
            }
        }
        Ok(k)
    }

    /// Symmetric `K(X, X)`.
    pub fn gram(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x)?;
        let p: Vec<Vec<f64>> = x.rows().map(|r| self.prepare(r)).collect();
        let n = x.nrows();
        let mut k = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.eval_prepared(&p[i], &p[j]);
                k.set(i, j, v);
                k.set(j, i, v);
            }
        }
        Ok(k)
    }
}

/// `K(X1, X2)` with parameters bound from `x1`.
pub fn kernel_matrix(x1: &Matrix, x2: &Matrix, spec: &KernelSpec) -> Result<Matrix> {
    spec.fit(x1)?.matrix(x1, x2)
}
