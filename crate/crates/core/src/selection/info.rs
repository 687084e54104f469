//! Discretized information-theoretic measures and greedy forward selection.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::{Error, Result};

/// Equal-width per-feature bins learned from training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretizer {
    pub mins: Vec<f64>,
    pub widths: Vec<f64>,
    /// 1 for constant features.
    pub n_bins: Vec<usize>,
}

/// Integer codes in `[0, n_bins[k])`, stored feature-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteFeatureMatrix {
    pub codes: Vec<Vec<usize>>,
    pub discretizer: Discretizer,
}

impl DiscreteFeatureMatrix {
    pub fn n_features(&self) -> usize {
        self.codes.len()
    }

    pub fn n_trials(&self) -> usize {
        self.codes.first().map_or(0, Vec::len)
    }

    pub fn feature(&self, k: usize) -> &[usize] {
        &self.codes[k]
    }
}

impl Discretizer {
    pub fn fit(x: &Matrix, n_bins: usize) -> Result<Discretizer> {
        if n_bins < 2 {
            return Err(Error::param("select.bins", "need at least 2 bins"));
        }
        if x.nrows() == 0 {
            return Err(Error::InsufficientData("empty training set".into()));
        }
        let mut mins = Vec::with_capacity(x.ncols());
        let mut widths = Vec::with_capacity(x.ncols());
        let mut bins = Vec::with_capacity(x.ncols());
        for k in 0..x.ncols() {
            let col = x.column(k);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            mins.push(lo);
            if hi > lo {
                widths.push((hi - lo) / n_bins as f64);
                bins.push(n_bins);
            } else {
                widths.push(0.0);
                bins.push(1);
            }
        }
        Ok(Discretizer {
            mins,
            widths,
            n_bins: bins,
        })
    }

    fn code(&self, k: usize, v: f64) -> usize {
        if self.n_bins[k] == 1 {
            return 0;
        }
        let b = ((v - self.mins[k]) / self.widths[k]).floor();
        if b.is_nan() || b < 0.0 {
            0
        } else {
            (b as usize).min(self.n_bins[k] - 1)
        }
    }

    /// Codes any matrix with the training edges; out-of-range values go
    /// to the edge bins.
    pub fn transform(&self, x: &Matrix) -> Result<DiscreteFeatureMatrix> {
        if x.ncols() != self.mins.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mins.len(),
                actual: x.ncols(),
            });
        }
        let codes = (0..x.ncols())
            .map(|k| x.rows().map(|r| self.code(k, r[k])).collect())
            .collect();
        Ok(DiscreteFeatureMatrix {
            codes,
            discretizer: self.clone(),
        })
    }
}

/// Fits bins on `x` and codes it.
pub fn discretize(x: &Matrix, n_bins: usize) -> Result<DiscreteFeatureMatrix> {
    Discretizer::fit(x, n_bins)?.transform(x)
}

/// Shannon entropy in bits; zero-probability terms contribute nothing.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.log2())
        .sum::<f64>()
}

fn card(x: &[usize]) -> usize {
    x.iter().max().map_or(0, |m| m + 1)
}

/// Entropy of the empirical distribution of `keys` in `[0, card)`.
fn count_entropy(keys: impl Iterator<Item = usize>, card: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mut counts = vec![0usize; card];
    for k in keys {
        counts[k] += 1;
    }
    let nf = n as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / nf;
            p * p.log2()
        })
        .sum::<f64>()
}

/// Joint variable with compact codes.
pub fn joint(a: &[usize], b: &[usize]) -> Vec<usize> {
    let cb = card(b);
    if let Some(prod) = card(a).checked_mul(cb) {
        if prod <= 4 * a.len().max(1024) {
            return a.iter().zip(b).map(|(x, y)| x * cb + y).collect();
        }
    }
    let mut ids = HashMap::new();
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let next = ids.len();
            *ids.entry((x, y)).or_insert(next)
        })
        .collect()
}

pub fn joint_entropy(x: &[usize]) -> f64 {
    count_entropy(x.iter().copied(), card(x), x.len())
}

fn check_len(a: &[usize], b: &[usize]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(())
}

/// `I(X;Y) = H(X) + H(Y) - H(X,Y)` in bits.
pub fn mutual_information(x: &[usize], y: &[usize]) -> Result<f64> {
    check_len(x, y)?;
    Ok(mi(x, y))
}

/// `I(X;Y|Z) = H(X,Z) + H(Y,Z) - H(X,Y,Z) - H(Z)` in bits.
pub fn conditional_mi(x: &[usize], y: &[usize], z: &[usize]) -> Result<f64> {
    check_len(x, y)?;
    check_len(x, z)?;
    Ok(cmi(x, y, z))
}

fn mi(x: &[usize], y: &[usize]) -> f64 {
    (joint_entropy(x) + joint_entropy(y) - joint_entropy(&joint(x, y))).max(0.0)
}

fn cmi(x: &[usize], y: &[usize], z: &[usize]) -> f64 {
    let xz = joint(x, z);
    let yz = joint(y, z);
    let xyz = joint(&xz, y);
    (joint_entropy(&xz) + joint_entropy(&yz) - joint_entropy(&xyz) - joint_entropy(z)).max(0.0)
}

/// Scoring criterion for greedy forward selection. `S` is the set selected
/// so far and every criterion reduces to `I(X_k;Y)` while `S` is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "criterion", rename_all = "snake_case")]
pub enum Criterion {
    Mim,
    /// `I(X_k;Y) - beta sum_S I(X_k;X_j)`.
    Mifs { beta: f64 },
    /// `sum_S I(X_k X_j; Y)`.
    Jmi,
    /// `I(X_k;Y|S)` with `S` as one joint variable.
    Cmi,
    Mrmr,
    Cmim,
    /// `I(X_k;Y) - sum_S max(0, I(X_k;X_j) - I(X_k;X_j|Y))`.
    Icap,
    Cife,
    Disr,
    /// `I(X_k;Y) - beta sum_S I(X_k;X_j) + gamma sum_S I(X_k;X_j|Y)`.
    BetaGamma { beta: f64, gamma: f64 },
    /// `I(X_k;Y) + sum_S I(X_k;X_j|Y)`.
    Condred,
}

impl Criterion {
    pub fn name(&self) -> &'static str {
        match self {
            Criterion::Mim => "mim",
            Criterion::Mifs { .. } => "mifs",
            Criterion::Jmi => "jmi",
            Criterion::Cmi => "cmi",
            Criterion::Mrmr => "mrmr",
            Criterion::Cmim => "cmim",
            Criterion::Icap => "icap",
            Criterion::Cife => "cife",
            Criterion::Disr => "disr",
            Criterion::BetaGamma { .. } => "betagamma",
            Criterion::Condred => "condred",
        }
    }

    /// Parses a criterion name; `beta` and `gamma` apply to the criteria
    /// that take them.
    pub fn parse(name: &str, beta: f64, gamma: f64) -> Result<Criterion> {
        Ok(match name.trim().to_ascii_lowercase().as_str() {
            "mim" => Criterion::Mim,
            "mifs" => Criterion::Mifs { beta },
            "jmi" => Criterion::Jmi,
            "cmi" => Criterion::Cmi,
            "mrmr" => Criterion::Mrmr,
            "cmim" => Criterion::Cmim,
            "icap" => Criterion::Icap,
            "cife" => Criterion::Cife,
            "disr" => Criterion::Disr,
            "betagamma" | "bg" => Criterion::BetaGamma { beta, gamma },
            "condred" | "cond" => Criterion::Condred,
            other => {
                return Err(Error::param(
                    "select.method",
                    format!("unknown criterion `{other}`"),
                ))
            }
        })
    }

    pub const ALL_NAMES: [&'static str; 11] = [
        "mim", "mifs", "jmi", "cmi", "mrmr", "cmim", "icap", "cife", "disr", "betagamma",
        "condred",
    ];
}

/// Ordered feature choice with the winning score at each step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub indices: Vec<usize>,
    pub scores: Vec<f64>,
    pub criterion: Criterion,
    pub d: usize,
}

/// Running per-candidate sums over the selected set.
struct Accum {
    mi_xx: Vec<f64>,
    cmi_xxy: Vec<f64>,
    jmi: Vec<f64>,
    disr: Vec<f64>,
    max_red: Vec<f64>,
    icap: Vec<f64>,
}

/// Scores below this are treated as zero when deciding that conditional
/// MI has saturated.
const SATURATION: f64 = 1e-12;

/// Greedy forward selection of up to `d` features; ties go to the lowest
/// feature index. [`Criterion::Cmi`] stops early once no candidate carries
/// information about `y` beyond the selected set.
pub fn feast_select(
    x: &DiscreteFeatureMatrix,
    y: &[usize],
    criterion: Criterion,
    d: usize,
) -> Result<SelectionResult> {
    let nf = x.n_features();
    if x.n_trials() == 0 || y.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    check_len(x.feature(0), y)?;
    if d > nf {
        return Err(Error::param(
            "select.d",
            format!("{d} exceeds the {nf} available features"),
        ));
    }
    let (b, g) = match criterion {
        Criterion::Mifs { beta } => (beta, 0.0),
        Criterion::BetaGamma { beta, gamma } => (beta, gamma),
        _ => (0.0, 0.0),
    };
    if !b.is_finite() || !g.is_finite() {
        return Err(Error::param("select.beta/gamma", "must be finite"));
    }
    let relevance: Vec<f64> = (0..nf).map(|k| mi(x.feature(k), y)).collect();
    let mut acc = Accum {
        mi_xx: vec![0.0; nf],
        cmi_xxy: vec![0.0; nf],
        jmi: vec![0.0; nf],
        disr: vec![0.0; nf],
        max_red: vec![f64::NEG_INFINITY; nf],
        icap: vec![0.0; nf],
    };
    let mut chosen = vec![false; nf];
    let mut indices = Vec::with_capacity(d);
    let mut scores = Vec::with_capacity(d);
    let mut joint_s: Option<Vec<usize>> = None;
    while indices.len() < d {
        let s = indices.len() as f64;
        let mut best: Option<(usize, f64)> = None;
        for k in (0..nf).filter(|&k| !chosen[k]) {
            let rel = relevance[k];
            let j = if indices.is_empty() {
                rel
            } else {
                match criterion {
                    Criterion::Mim => rel,
                    Criterion::Mifs { beta } => rel - beta * acc.mi_xx[k],
                    Criterion::Jmi => acc.jmi[k],
                    Criterion::Cmi => cmi(x.feature(k), y, joint_s.as_deref().unwrap_or(&[])),
                    Criterion::Mrmr => rel - acc.mi_xx[k] / s,
                    Criterion::Cmim => rel - acc.max_red[k],
                    Criterion::Icap => rel - acc.icap[k],
                    Criterion::Cife => rel - acc.mi_xx[k] + acc.cmi_xxy[k],
                    Criterion::Disr => acc.disr[k],
                    Criterion::BetaGamma { beta, gamma } => {
                        rel - beta * acc.mi_xx[k] + gamma * acc.cmi_xxy[k]
                    }
                    Criterion::Condred => rel + acc.cmi_xxy[k],
                }
            };
            if best.is_none_or(|(_, bj)| j > bj) {
                best = Some((k, j));
            }
        }
        let Some((pick, score)) = best else { break };
        if matches!(criterion, Criterion::Cmi) && !indices.is_empty() && score <= SATURATION {
            log::debug!("cmi saturated after {} features", indices.len());
            break;
        }
        chosen[pick] = true;
        indices.push(pick);
        scores.push(score);
        if indices.len() == d {
            break;
        }
        let fj = x.feature(pick);
        match criterion {
            Criterion::Mim => {}
            Criterion::Cmi => {
                joint_s = Some(match joint_s {
                    None => fj.to_vec(),
                    Some(js) => joint(&js, fj),
                });
            }
            _ => {
                for k in (0..nf).filter(|&k| !chosen[k]) {
                    let fk = x.feature(k);
                    let red = mi(fk, fj);
                    acc.mi_xx[k] += red;
                    match criterion {
                        Criterion::Jmi | Criterion::Disr => {
                            let kj = joint(fk, fj);
                            let i = mi(&kj, y);
                            acc.jmi[k] += i;
                            let h = joint_entropy(&joint(&kj, y));
                            if h > 0.0 {
                                acc.disr[k] += i / h;
                            }
                        }
                        Criterion::Cmim | Criterion::Icap | Criterion::Cife
                        | Criterion::BetaGamma { .. } | Criterion::Condred => {
                            let c = cmi(fk, fj, y);
                            acc.cmi_xxy[k] += c;
                            acc.max_red[k] = acc.max_red[k].max(red - c);
                            acc.icap[k] += (red - c).max(0.0);
                        }
                        _ => {}
                    }
                }
            }
        }
    }
    Ok(SelectionResult {
        indices,
        scores,
        criterion,
        d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn from_cols(cols: &[Vec<usize>]) -> DiscreteFeatureMatrix {
        let n = cols[0].len();
        let x = Matrix::from_vec(
            n,
            cols.len(),
            (0..n).flat_map(|i| cols.iter().map(move |c| c[i] as f64)).collect(),
        )
        .unwrap();
        discretize(&x, 2).unwrap()
    }

    #[test]
    fn discretize_examples() {
        let x = Matrix::from_vec(4, 2, vec![0.0, 5.0, 1.0, 5.0, 2.0, 5.0, 3.0, 5.0]).unwrap();
        let d = discretize(&x, 2).unwrap();
        assert_eq!(d.feature(0), &[0, 0, 1, 1]);
        assert_eq!(d.feature(1), &[0, 0, 0, 0]);
        let t = Matrix::from_vec(2, 2, vec![-10.0, 1.0, 99.0, 5.0]).unwrap();
        let e = d.discretizer.transform(&t).unwrap();
        assert_eq!(e.feature(0), &[0, 1]);
        assert!(discretize(&x, 1).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert!((entropy(&[0.25; 4]) - 2.0).abs() < 1e-12);
        assert_eq!(entropy(&[1.0, 0.0]), 0.0);
        let oracle = -(0.5f64 * 0.5f64.log2() + 2.0 * 0.25 * 0.25f64.log2());
        assert!((entropy(&[0.5, 0.25, 0.25]) - oracle).abs() < 1e-12);
        assert!((oracle - 1.5).abs() < 1e-12);
    }

    #[test]
    fn mutual_information_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<usize> = (0..10_000).map(|_| rng.random_range(0..4)).collect();
        let y: Vec<usize> = (0..10_000).map(|_| rng.random_range(0..3)).collect();
        assert!((mutual_information(&x, &x).unwrap() - joint_entropy(&x)).abs() < 1e-12);
        assert!(mutual_information(&x, &y).unwrap() <= 0.02);
        let a: Vec<usize> = (0..4000).map(|_| rng.random_range(0..2)).collect();
        let b: Vec<usize> = (0..4000).map(|_| rng.random_range(0..2)).collect();
        let z: Vec<usize> = a.iter().zip(&b).map(|(p, q)| p ^ q).collect();
        assert!(mutual_information(&a, &z).unwrap() < 0.01);
        assert!((conditional_mi(&a, &z, &b).unwrap() - 1.0).abs() < 0.01);
    }

    /// f0 copies the label, f1 is independent noise, f2 copies f0.
    fn toy() -> (DiscreteFeatureMatrix, Vec<usize>) {
        let y: Vec<usize> = (0..8).map(|i| i / 4).collect();
        let noise = vec![0, 1, 0, 1, 0, 1, 0, 1];
        (from_cols(&[y.clone(), noise, y.clone()]), y)
    }

    #[test]
    fn toy_mim_and_mrmr() {
        let (x, y) = toy();
        let m = feast_select(&x, &y, Criterion::Mim, 2).unwrap();
        assert_eq!(m.indices, vec![0, 2]);
        // J values: I(f1;Y) - I(f1;f0) = 0 vs I(f2;Y) - I(f2;f0) = 1 - 1 = 0;
        // tie goes to the lower index
        let r = feast_select(&x, &y, Criterion::Mrmr, 2).unwrap();
        assert_eq!(r.indices, vec![0, 1]);
    }

    fn random_problem(seed: u64, n: usize, nf: usize) -> (DiscreteFeatureMatrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let x = Matrix::from_vec(
            n,
            nf,
            (0..n)
                .flat_map(|i| {
                    let yi = y[i] as f64;
                    (0..nf)
                        .map(|k| yi * (k % 4) as f64 * 0.3 + rng.random::<f64>() * (1.0 + k as f64 * 0.1))
                        .collect::<Vec<_>>()
                })
                .collect(),
        )
        .unwrap();
        (discretize(&x, 6).unwrap(), y)
    }

    #[test]
    fn degenerate_parameters_match_mim_and_condred() {
        let (x, y) = random_problem(5, 300, 12);
        let mim = feast_select(&x, &y, Criterion::Mim, 6).unwrap();
        let mifs0 = feast_select(&x, &y, Criterion::Mifs { beta: 0.0 }, 6).unwrap();
        let bg00 = feast_select(&x, &y, Criterion::BetaGamma { beta: 0.0, gamma: 0.0 }, 6).unwrap();
        assert_eq!(mim.indices, mifs0.indices);
        assert_eq!(mim.indices, bg00.indices);
        let cond = feast_select(&x, &y, Criterion::Condred, 6).unwrap();
        let bg01 = feast_select(&x, &y, Criterion::BetaGamma { beta: 0.0, gamma: 1.0 }, 6).unwrap();
        assert_eq!(cond.indices, bg01.indices);
    }

    #[test]
    fn mim_ranks_by_relevance() {
        let (x, y) = random_problem(8, 200, 10);
        let r = feast_select(&x, &y, Criterion::Mim, 10).unwrap();
        let mut oracle: Vec<(usize, f64)> =
            (0..10).map(|k| (k, mutual_information(x.feature(k), &y).unwrap())).collect();
        oracle.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        assert_eq!(r.indices, oracle.iter().map(|p| p.0).collect::<Vec<_>>());
    }

    #[test]
    fn cmi_saturates_early() {
        let (x, y) = random_problem(2, 60, 40);
        let r = feast_select(&x, &y, Criterion::Cmi, 40).unwrap();
        assert!(r.indices.len() < 40);
        assert!(feast_select(&x, &y, Criterion::Mim, 41).is_err());
    }

    #[test]
    fn full_selection_returns_every_feature() {
        let (x, y) = random_problem(4, 120, 7);
        for name in Criterion::ALL_NAMES.iter().filter(|&&n| n != "cmi") {
            let c = Criterion::parse(name, 1.0, 1.0).unwrap();
            let mut r = feast_select(&x, &y, c, 7).unwrap().indices;
            r.sort();
            assert_eq!(r, (0..7).collect::<Vec<_>>(), "{name}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn selection_is_permutation_equivariant(seed in 0u64..1000, crit in 0usize..11) {
            let (x, y) = random_problem(seed, 150, 8);
            let c = Criterion::parse(Criterion::ALL_NAMES[crit], 1.0, 1.0).unwrap();
            let base = feast_select(&x, &y, c, 4).unwrap();
            // reverse the columns
            let mut px = x.clone();
            px.codes.reverse();
            let perm = feast_select(&px, &y, c, 4).unwrap();
            let mapped: Vec<usize> = perm.indices.iter().map(|&i| 7 - i).collect();
            prop_assert_eq!(base.indices, mapped);
            prop_assert_eq!(base.scores, perm.scores);
        }
    }
}
