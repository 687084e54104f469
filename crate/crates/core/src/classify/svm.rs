//! C-SVM trained by SMO with second-order working-set selection, Platt
//! calibration and one-vs-all multi-class wrapping.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{Kernel, KernelSpec};
use crate::linalg::Matrix;
use crate::{Error, Result};

const TAU: f64 = 1e-12;

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    /// Stop once the maximal KKT violation falls below this.
    pub eps: f64,
    /// Iteration cap per training sample.
    pub max_iter_per_sample: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            eps: 1e-3,
            max_iter_per_sample: 10_000,
        }
    }
}

/// Dual solution of one binary problem on a precomputed Gram matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    /// `max_up(-y G) - min_low(-y G)` at exit.
    pub kkt_gap: f64,
    pub converged: bool,
}

/// SMO on `min 1/2 a^T Q a - e^T a`, `Q_ij = y_i y_j K_ij`,
/// `0 <= a <= C`, `y^T a = 0`.
pub fn smo(k: &Matrix, y: &[f64], params: &SvmParams) -> Result<DualSolution> {
    let n = y.len();
    if k.nrows() != n || k.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: k.nrows(),
        });
    }
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::param("clf.C", format!("must be positive, got {}", params.c)));
    }
    if !y.iter().any(|&v| v > 0.0) || !y.iter().any(|&v| v < 0.0) {
        return Err(Error::InsufficientData("binary SVM needs both classes".into()));
    }
    let c = params.c;
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = params.max_iter_per_sample.saturating_mul(n).max(1);
    let up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);
    let mut iterations = 0;
    let mut gap = f64::INFINITY;
    let mut converged = false;
    let diag: Vec<f64> = (0..n).map(|t| k.get(t, t)).collect();
    // First index of the working set: the first maximizer of -y G over I_up.
    let (mut i, mut gmax) = (usize::MAX, f64::NEG_INFINITY);
    for t in 0..n {
        let v = -y[t] * grad[t];
        if up(alpha[t], y[t]) && (v > gmax || i == usize::MAX) {
            gmax = v;
            i = t;
        }
    }
    while iterations < max_iter {
        let mut gmin = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        let (kii, ki) = if i == usize::MAX { (0.0, &[][..]) } else { (diag[i], k.row(i)) };
        for t in 0..n {
            if !low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            if i != usize::MAX && v < gmax {
                let b = gmax - v;
                let mut a = kii + diag[t] - 2.0 * ki[t];
                if a <= 0.0 {
                    a = TAU;
                }
                let obj = -b * b / a;
                if obj < best {
                    best = obj;
                    j = t;
                }
            }
        }
        gap = gmax - gmin;
        if i == usize::MAX || j == usize::MAX || gap < params.eps {
            converged = true;
            break;
        }
        iterations += 1;
        let (ai, aj) = (alpha[i], alpha[j]);
        let mut quad = k.get(i, i) + k.get(j, j) - 2.0 * k.get(i, j);
        if quad <= 0.0 {
            quad = TAU;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            let (mut ni, mut nj) = (ai + delta, aj + delta);
            if diff > 0.0 {
                if nj < 0.0 {
                    nj = 0.0;
                    ni = diff;
                }
            } else if ni < 0.0 {
                ni = 0.0;
                nj = -diff;
            }
            if diff > 0.0 {
                if ni > c {
                    ni = c;
                    nj = c - diff;
                }
            } else if nj > c {
                nj = c;
                ni = c + diff;
            }
            alpha[i] = ni;
            alpha[j] = nj;
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            let (mut ni, mut nj) = (ai - delta, aj + delta);
            if sum > c {
                if ni > c {
                    ni = c;
                    nj = sum - c;
                }
            } else if nj < 0.0 {
                nj = 0.0;
                ni = sum;
            }
            if sum > c {
                if nj > c {
                    nj = c;
                    ni = sum - c;
                }
            } else if ni < 0.0 {
                ni = 0.0;
                nj = sum;
            }
            alpha[i] = ni;
            alpha[j] = nj;
        }
        let di = alpha[i] - ai;
        let dj = alpha[j] - aj;
        let (ki, kj) = (k.row(i), k.row(j));
        let (ci, cj) = (y[i] * di, y[j] * dj);
        (i, gmax) = (usize::MAX, f64::NEG_INFINITY);
        for t in 0..n {
            grad[t] += y[t] * (ci * ki[t] + cj * kj[t]);
            let v = -y[t] * grad[t];
            if up(alpha[t], y[t]) && (v > gmax || i == usize::MAX) {
                gmax = v;
                i = t;
            }
        }
    }
    if !converged {
        log::warn!("SMO hit the iteration cap ({max_iter}); KKT gap {gap:e}");
    }
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut n_free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };
    Ok(DualSolution {
        alpha,
        rho,
        iterations,
        kkt_gap: gap,
        converged,
    })
}

/// Platt sigmoid `P(y=1|f) = 1 / (1 + exp(A f + B))`, `A < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Platt {
    pub a: f64,
    pub b: f64,
}

impl Platt {
    pub fn probability(&self, f: f64) -> f64 {
        let z = self.a * f + self.b;
        if z >= 0.0 {
            let e = (-z).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + z.exp())
        }
    }
}

/// Regularized maximum-likelihood sigmoid fit (Newton with backtracking)
/// using the smoothed targets `(N+ + 1)/(N+ + 2)` and `1/(N- + 2)`.
pub fn platt_calibrate(decisions: &[f64], y: &[f64]) -> Result<Platt> {
    if decisions.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: decisions.len(),
            actual: y.len(),
        });
    }
    let prior1 = y.iter().filter(|&&v| v > 0.0).count() as f64;
    let prior0 = y.len() as f64 - prior1;
    if prior1 == 0.0 || prior0 == 0.0 {
        return Err(Error::InsufficientData("Platt scaling needs both classes".into()));
    }
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let t: Vec<f64> = y.iter().map(|&v| if v > 0.0 { hi } else { lo }).collect();
    let obj = |a: f64, b: f64| -> f64 {
        decisions
            .iter()
            .zip(&t)
            .map(|(&f, &ti)| {
                let z = f * a + b;
                if z >= 0.0 {
                    ti * z + (-z).exp().ln_1p()
                } else {
                    (ti - 1.0) * z + z.exp().ln_1p()
                }
            })
            .sum()
    };
    let (mut a, mut b) = (0.0, ((prior0 + 1.0) / (prior1 + 1.0)).ln());
    let mut fval = obj(a, b);
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (1e-12, 1e-12, 0.0, 0.0, 0.0);
        for (&f, &ti) in decisions.iter().zip(&t) {
            let z = f * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = ti - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = obj(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < 1e-10 {
            break;
        }
    }
    Ok(Platt { a: a.min(-1e-12), b })
}

/// One binary problem of the one-vs-all ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    /// `alpha_i y_i` for each stored training row.
    pub coef: Vec<f64>,
    pub rho: f64,
    pub platt: Platt,
    pub converged: bool,
    pub iterations: usize,
}

/// One-vs-all SVM; class `c` is positive in problem `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvaSvm {
    pub kernel: Kernel,
    /// Kernel-prepared rows with a nonzero coefficient in some problem.
    pub support: Vec<Vec<f64>>,
    pub models: Vec<BinarySvm>,
}

fn decisions_from_gram(k: &Matrix, coef: &[f64], rho: f64) -> Vec<f64> {
    k.rows()
        .map(|r| r.iter().zip(coef).map(|(a, b)| a * b).sum::<f64>() - rho)
        .collect()
}

/// Binary SVM on `y` in `{-1, +1}`.
pub fn svm_train(x: &Matrix, y: &[f64], spec: &KernelSpec, params: &SvmParams) -> Result<OvaSvm> {
    let kernel = spec.fit(x)?;
    let gram = kernel.gram(x)?;
    let m = binary(&gram, y, params)?;
    Ok(compact(kernel, x, vec![m]))
}

fn binary(gram: &Matrix, y: &[f64], params: &SvmParams) -> Result<BinarySvm> {
    let sol = smo(gram, y, params)?;
    let coef: Vec<f64> = sol.alpha.iter().zip(y).map(|(a, t)| a * t).collect();
    let dec = decisions_from_gram(gram, &coef, sol.rho);
    Ok(BinarySvm {
        platt: platt_calibrate(&dec, y)?,
        coef,
        rho: sol.rho,
        converged: sol.converged,
        iterations: sol.iterations,
    })
}

fn compact(kernel: Kernel, x: &Matrix, mut models: Vec<BinarySvm>) -> OvaSvm {
    let keep: Vec<usize> = (0..x.nrows())
        .filter(|&i| models.iter().any(|m| m.coef[i] != 0.0))
        .collect();
    for m in &mut models {
        m.coef = keep.iter().map(|&i| m.coef[i]).collect();
    }
    OvaSvm {
        support: keep.iter().map(|&i| kernel.prepare(x.row(i))).collect(),
        kernel,
        models,
    }
}

/// One binary problem per class in `0..n_classes`; every class must occur
/// in `y`.
pub fn ova_train(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    spec: &KernelSpec,
    params: &SvmParams,
) -> Result<OvaSvm> {
    if n_classes < 2 {
        return Err(Error::InsufficientData(
            "one-vs-all needs at least two classes".into(),
        ));
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: y.len(),
        });
    }
    let missing: Vec<usize> = (0..n_classes).filter(|c| !y.contains(c)).collect();
    if !missing.is_empty() {
        return Err(Error::InsufficientData(format!(
            "classes {missing:?} absent from training data"
        )));
    }
    let kernel = spec.fit(x)?;
    let gram = kernel.gram(x)?;
    let models = (0..n_classes)
        .into_par_iter()
        .map(|c| {
            let yb: Vec<f64> = y.iter().map(|&t| if t == c { 1.0 } else { -1.0 }).collect();
            binary(&gram, &yb, params)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(compact(kernel, x, models))
}

impl OvaSvm {
    pub fn converged(&self) -> bool {
        self.models.iter().all(|m| m.converged)
    }

    /// Raw decision value of each binary problem.
    pub fn decision(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.kernel.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.kernel.n_features,
                actual: x.len(),
            });
        }
        let px = self.kernel.prepare(x);
        let k: Vec<f64> = self
            .support
            .iter()
            .map(|s| self.kernel.eval_prepared(s, &px))
            .collect();
        Ok(self
            .models
            .iter()
            .map(|m| m.coef.iter().zip(&k).map(|(a, b)| a * b).sum::<f64>() - m.rho)
            .collect())
    }

    /// Platt probability of each class against the rest.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .decision(x)?
            .iter()
            .zip(&self.models)
            .map(|(&f, m)| m.platt.probability(f))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::kernel::KernelKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn separable() -> (Matrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut rows = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        let mut y = vec![1.0, -1.0];
        for _ in 0..20 {
            let (a, b) = (1.5 + rng.random::<f64>() * 2.0, rng.random::<f64>() * 4.0 - 2.0);
            rows.push(vec![a, b]);
            y.push(1.0);
            rows.push(vec![-a, -b]);
            y.push(-1.0);
        }
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn separable_margin_and_dual_feasibility() {
        let (x, y) = separable();
        let params = SvmParams { c: 1e3, ..Default::default() };
        let gram = KernelSpec::default().fit(&x).unwrap().gram(&x).unwrap();
        let sol = smo(&gram, &y, &params).unwrap();
        assert!(sol.converged && sol.kkt_gap <= 1e-3);
        assert!(sol.alpha.iter().all(|&a| (0.0..=params.c).contains(&a)));
        let bal: f64 = sol.alpha.iter().zip(&y).map(|(a, t)| a * t).sum();
        assert!(bal.abs() < 1e-6);
        let mut w = [0.0; 2];
        for (i, r) in x.rows().enumerate() {
            w[0] += sol.alpha[i] * y[i] * r[0];
            w[1] += sol.alpha[i] * y[i] * r[1];
        }
        // closest pair (1,0)/(-1,0) gives a geometric margin of 1
        let margin = 1.0 / (w[0] * w[0] + w[1] * w[1]).sqrt();
        assert!(margin >= 1.0 * (1.0 - 1e-3), "{margin}");
        let m = svm_train(&x, &y, &KernelSpec::default(), &params).unwrap();
        for (r, &t) in x.rows().zip(&y) {
            assert!(m.decision(r).unwrap()[0] * t > 0.0);
        }
    }

    fn xor() -> (Matrix, Vec<f64>) {
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]]).unwrap();
        (x, vec![1.0, 1.0, -1.0, -1.0])
    }

    #[test]
    fn xor_needs_nonlinear_kernel() {
        let (x, y) = xor();
        let acc = |m: &OvaSvm| {
            x.rows().zip(&y).filter(|(r, &t)| m.decision(r).unwrap()[0] * t > 0.0).count() as f64 / 4.0
        };
        let p = SvmParams { c: 100.0, ..Default::default() };
        assert!(acc(&svm_train(&x, &y, &KernelSpec::default(), &p).unwrap()) <= 0.75);
        let rbf = KernelSpec::new(KernelKind::Rbf).with_gamma(1.0);
        assert_eq!(acc(&svm_train(&x, &y, &rbf, &p).unwrap()), 1.0);
    }

    #[test]
    fn duplicated_points_leave_decision_unchanged() {
        let (x, y) = separable();
        let rows: Vec<Vec<f64>> = x.rows().chain(x.rows()).map(|r| r.to_vec()).collect();
        let x2 = Matrix::from_rows(&rows).unwrap();
        let y2: Vec<f64> = y.iter().chain(&y).copied().collect();
        let p = SvmParams { c: 1e3, eps: 1e-10, ..Default::default() };
        let spec = KernelSpec::default();
        let a = svm_train(&x, &y, &spec, &p).unwrap();
        let b = svm_train(&x2, &y2, &spec, &p).unwrap();
        for gx in -4..=4 {
            for gy in -4..=4 {
                let q = [gx as f64 * 0.7, gy as f64 * 0.7];
                let (da, db) = (a.decision(&q).unwrap()[0], b.decision(&q).unwrap()[0]);
                assert!((da - db).abs() < 1e-6, "{da} {db}");
            }
        }
    }

    #[test]
    fn platt_is_increasing() {
        let d = [-2.0, -1.5, -0.3, 0.2, 0.1, 1.0, 2.5, -0.1];
        let y = [-1.0, -1.0, -1.0, 1.0, -1.0, 1.0, 1.0, 1.0];
        let p = platt_calibrate(&d, &y).unwrap();
        assert!(p.a < 0.0);
        let probs: Vec<f64> = (-20..=20).map(|i| p.probability(i as f64 * 0.25)).collect();
        assert!(probs.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn ova_errors() {
        let (x, _) = separable();
        let y: Vec<usize> = (0..x.nrows()).map(|i| i % 2).collect();
        assert!(ova_train(&x, &y, 3, &KernelSpec::default(), &SvmParams::default()).is_err());
        assert!(ova_train(&x, &vec![0; x.nrows()], 1, &KernelSpec::default(), &SvmParams::default()).is_err());
        let bad = SvmParams { c: 0.0, ..Default::default() };
        assert!(ova_train(&x, &y, 2, &KernelSpec::default(), &bad).is_err());
    }
}
