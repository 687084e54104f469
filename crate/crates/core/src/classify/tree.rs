//! CART decision trees (Gini impurity) and tree ensembles: SAMME AdaBoost
//! and bootstrap aggregation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Weighted class fractions of the training samples reaching the leaf.
    Leaf { dist: Vec<f64> },
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub n_features: usize,
    pub n_classes: usize,
}

fn weighted_impurity(counts: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        0.0
    } else {
        total - counts.iter().map(|c| c * c).sum::<f64>() / total
    }
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    w: &'a [f64],
    n_classes: usize,
    params: TreeParams,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn leaf(&mut self, counts: Vec<f64>, total: f64) -> usize {
        let dist = if total > 0.0 {
            counts.iter().map(|c| c / total).collect()
        } else {
            vec![1.0 / self.n_classes as f64; self.n_classes]
        };
        self.nodes.push(Node::Leaf { dist });
        self.nodes.len() - 1
    }

    /// Best split as (feature, threshold, position in the sorted order);
    /// ties go to the lowest feature, then the lowest threshold.
    fn best_split(&self, idx: &[usize], counts: &[f64], total: f64) -> Option<(usize, f64)> {
        let parent = weighted_impurity(counts, total);
        let min_leaf = self.params.min_leaf.max(1);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = idx.to_vec();
        for f in 0..self.x.ncols() {
            order.sort_by(|&a, &b| self.x.get(a, f).total_cmp(&self.x.get(b, f)).then(a.cmp(&b)));
            let mut left = vec![0.0; self.n_classes];
            let mut wl = 0.0;
            for pos in 0..order.len() - 1 {
                let i = order[pos];
                left[self.y[i]] += self.w[i];
                wl += self.w[i];
                let (v, next) = (self.x.get(i, f), self.x.get(order[pos + 1], f));
                if next <= v || pos + 1 < min_leaf || order.len() - pos - 1 < min_leaf {
                    continue;
                }
                let right: Vec<f64> = counts.iter().zip(&left).map(|(a, b)| a - b).collect();
                let gain = parent - weighted_impurity(&left, wl) - weighted_impurity(&right, total - wl);
                if best.is_none_or(|(g, _, _)| gain > g + 1e-12 * total) {
                    let thr = v + (next - v) / 2.0;
                    best = Some((gain, f, if thr < next { thr } else { v }));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let mut counts = vec![0.0; self.n_classes];
        for &i in &idx {
            counts[self.y[i]] += self.w[i];
        }
        let total: f64 = counts.iter().sum();
        let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
        let depth_done = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_done || idx.len() < 2 * self.params.min_leaf.max(1) {
            return self.leaf(counts, total);
        }
        let Some((feature, threshold)) = self.best_split(&idx, &counts, total) else {
            return self.leaf(counts, total);
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| self.x.get(i, feature) <= threshold);
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { dist: Vec::new() });
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[slot] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        slot
    }
}

fn check_xy(x: &Matrix, y: &[usize], n_classes: usize) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: y.len(),
        });
    }
    if x.nrows() == 0 {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    if let Some(&c) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::IndexOutOfRange { index: c, len: n_classes });
    }
    Ok(())
}

/// Grows a tree on the rows listed in `idx` (repeats allowed) with
/// per-row weights `w`.
fn grow_tree(
    x: &Matrix,
    y: &[usize],
    w: &[f64],
    idx: Vec<usize>,
    n_classes: usize,
    params: TreeParams,
) -> Tree {
    let mut b = Builder {
        x,
        y,
        w,
        n_classes,
        params,
        nodes: Vec::new(),
    };
    b.grow(idx, 0);
    Tree {
        nodes: b.nodes,
        n_features: x.ncols(),
        n_classes,
    }
}

pub fn tree_train(x: &Matrix, y: &[usize], n_classes: usize, params: TreeParams) -> Result<Tree> {
    check_xy(x, y, n_classes)?;
    Ok(grow_tree(x, y, &vec![1.0; y.len()], (0..y.len()).collect(), n_classes, params))
}

impl Tree {
    pub fn leaf_dist(&self, x: &[f64]) -> &[f64] {
        let mut n = 0;
        loop {
            match &self.nodes[n] {
                Node::Leaf { dist } => return dist,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => n = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        super::argmax(self.leaf_dist(x))
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], n: usize) -> usize {
            match &nodes[n] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: x.len(),
            });
        }
        Ok(self.leaf_dist(x).to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    AdaBoost,
    Bagging,
}

/// Weighted vote over trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub kind: EnsembleKind,
    pub learners: Vec<Tree>,
    pub weights: Vec<f64>,
    pub n_classes: usize,
    /// AdaBoost: ensemble training error after each accepted round.
    pub training_errors: Vec<f64>,
    /// AdaBoost: mean multi-class exponential loss after each accepted
    /// round; non-increasing and an upper bound on the training error.
    pub training_loss: Vec<f64>,
}

impl Ensemble {
    /// Normalized weighted vote per class.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut votes = vec![0.0; self.n_classes];
        let total: f64 = self.weights.iter().sum();
        for (t, w) in self.learners.iter().zip(&self.weights) {
            if x.len() != t.n_features {
                return Err(Error::DimensionMismatch {
                    expected: t.n_features,
                    actual: x.len(),
                });
            }
            votes[t.predict(x)] += w;
        }
        if total > 0.0 {
            votes.iter_mut().for_each(|v| *v /= total);
        }
        Ok(votes)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(super::argmax(&self.scores(x)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostParams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub seed: u64,
    /// Weighted resampling attempts for a round worse than chance.
    pub max_retries: usize,
}

impl Default for AdaBoostParams {
    fn default() -> Self {
        AdaBoostParams {
            n_rounds: 100,
            max_depth: 1,
            seed: 0,
            max_retries: 10,
        }
    }
}

/// Draws `n` indices with probability proportional to `w`.
fn weighted_resample(rng: &mut ChaCha8Rng, w: &[f64]) -> Vec<usize> {
    let mut cdf = Vec::with_capacity(w.len());
    let mut acc = 0.0;
    for &v in w {
        acc += v;
        cdf.push(acc);
    }
    (0..w.len())
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            cdf.partition_point(|&c| c <= u).min(w.len() - 1)
        })
        .collect()
}

/// Multi-class AdaBoost (SAMME) over depth-limited trees.
pub fn adaboost_train(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    params: &AdaBoostParams,
) -> Result<Ensemble> {
    check_xy(x, y, n_classes)?;
    if params.n_rounds == 0 || params.max_depth == 0 || n_classes < 2 {
        return Err(Error::param("clf.n_learners", "rounds, depth and classes must be positive"));
    }
    let n = y.len();
    let k = n_classes as f64;
    let tp = TreeParams {
        max_depth: Some(params.max_depth),
        min_leaf: 1,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut w = vec![1.0 / n as f64; n];
    let ones = vec![1.0; n];
    let mut ens = Ensemble {
        kind: EnsembleKind::AdaBoost,
        learners: Vec::new(),
        weights: Vec::new(),
        n_classes,
        training_errors: Vec::new(),
        training_loss: Vec::new(),
    };
    // per-sample exponent of exp(-y^T f / K) under the symmetric class coding
    let mut expo = vec![0.0; n];
    let mut margin = vec![vec![0.0; n_classes]; n];
    let chance = 1.0 - 1.0 / k;
    for round in 0..params.n_rounds {
        let weighted_err = |t: &Tree, w: &[f64]| {
            let miss: f64 = (0..n).filter(|&i| t.predict(x.row(i)) != y[i]).map(|i| w[i]).sum();
            miss / w.iter().sum::<f64>()
        };
        let mut tree = grow_tree(x, y, &w, (0..n).collect(), n_classes, tp);
        let mut err = weighted_err(&tree, &w);
        let mut tries = 0;
        while err >= chance && tries < params.max_retries {
            tree = grow_tree(x, y, &ones, weighted_resample(&mut rng, &w), n_classes, tp);
            err = weighted_err(&tree, &w);
            tries += 1;
        }
        if err >= chance {
            log::debug!("adaboost round {round} skipped (error {err:.3})");
            continue;
        }
        let e = err.max(1e-10);
        let alpha = ((1.0 - e) / e).ln() + (k - 1.0).ln();
        let pred: Vec<usize> = (0..n).map(|i| tree.predict(x.row(i))).collect();
        for i in 0..n {
            margin[i][pred[i]] += alpha;
            if pred[i] != y[i] {
                w[i] *= alpha.exp();
                expo[i] += alpha / k;
            } else {
                expo[i] -= alpha * (k - 1.0) / k;
            }
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        ens.learners.push(tree);
        ens.weights.push(alpha);
        let wrong = (0..n).filter(|&i| super::argmax(&margin[i]) != y[i]).count();
        ens.training_errors.push(wrong as f64 / n as f64);
        ens.training_loss
            .push(expo.iter().map(|e| e.exp()).sum::<f64>() / n as f64);
        if err <= 0.0 {
            break;
        }
    }
    if ens.learners.is_empty() {
        return Err(Error::Numerical("no AdaBoost round beat chance".into()));
    }
    Ok(ens)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaggingParams {
    pub n_learners: usize,
    pub seed: u64,
    pub tree: TreeParams,
}

impl Default for BaggingParams {
    fn default() -> Self {
        BaggingParams {
            n_learners: 100,
            seed: 0,
            tree: TreeParams::default(),
        }
    }
}

/// Equal-weight vote of trees grown on the given row resamples.
pub fn bagging_from_resamples(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    resamples: &[Vec<usize>],
    tree: TreeParams,
) -> Result<Ensemble> {
    check_xy(x, y, n_classes)?;
    if resamples.is_empty() || resamples.iter().any(Vec::is_empty) {
        return Err(Error::param("clf.n_learners", "need non-empty resamples"));
    }
    if let Some(&bad) = resamples.iter().flatten().find(|&&i| i >= y.len()) {
        return Err(Error::IndexOutOfRange { index: bad, len: y.len() });
    }
    let ones = vec![1.0; y.len()];
    let learners: Vec<Tree> = resamples
        .iter()
        .map(|r| grow_tree(x, y, &ones, r.clone(), n_classes, tree))
        .collect();
    Ok(Ensemble {
        kind: EnsembleKind::Bagging,
        weights: vec![1.0; learners.len()],
        learners,
        n_classes,
        training_errors: Vec::new(),
        training_loss: Vec::new(),
    })
}

/// Bootstrap aggregation with seeded resampling with replacement.
pub fn bagging_train(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    params: &BaggingParams,
) -> Result<Ensemble> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = y.len();
    let resamples: Vec<Vec<usize>> = (0..params.n_learners)
        .map(|_| (0..n).map(|_| rng.random_range(0..n.max(1))).collect())
        .collect();
    bagging_from_resamples(x, y, n_classes, &resamples, params.tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn accuracy(f: impl Fn(&[f64]) -> usize, x: &Matrix, y: &[usize]) -> f64 {
        x.rows().zip(y).filter(|(r, &c)| f(r) == c).count() as f64 / y.len() as f64
    }

    #[test]
    fn single_threshold_gives_stump() {
        let x = Matrix::from_rows(&[[1.0, 5.0], [2.0, 1.0], [3.0, 4.0], [4.0, 2.0]]).unwrap();
        let y = [0, 0, 1, 1];
        let t = tree_train(&x, &y, 2, TreeParams::default()).unwrap();
        assert_eq!(t.depth(), 1);
        assert!(matches!(t.nodes[0], Node::Split { feature: 0, threshold, .. } if threshold == 2.5));
        assert_eq!(accuracy(|r| t.predict(r), &x, &y), 1.0);
        let pure = tree_train(&x, &[1, 1, 1, 1], 2, TreeParams::default()).unwrap();
        assert_eq!(pure.nodes.len(), 1);
    }

    #[test]
    fn unconstrained_tree_fits_consistent_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<[f64; 3]> = (0..200).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
        let y: Vec<usize> = (0..200).map(|_| rng.random_range(0..5)).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let t = tree_train(&x, &y, 5, TreeParams::default()).unwrap();
        assert_eq!(accuracy(|r| t.predict(r), &x, &y), 1.0);
        // XOR requires a zero-gain first split
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]]).unwrap();
        let t = tree_train(&x, &[0, 0, 1, 1], 2, TreeParams::default()).unwrap();
        assert_eq!(accuracy(|r| t.predict(r), &x, &[0, 0, 1, 1]), 1.0);
    }

    #[test]
    fn adaboost_error_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<[f64; 2]> = (0..120).map(|_| [rng.random(), rng.random()]).collect();
        let y: Vec<usize> = rows.iter().map(|r| usize::from(r[0] + 0.5 * r[1] > 0.75)).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let e = adaboost_train(&x, &y, 2, &AdaBoostParams::default()).unwrap();
        let (errs, loss) = (&e.training_errors, &e.training_loss);
        assert!(errs.len() > 1);
        assert!(loss.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)), "{loss:?}");
        assert!(errs.iter().zip(loss).all(|(e, l)| e <= l));
        assert_eq!(*errs.last().unwrap(), 0.0);
        assert_eq!(accuracy(|r| e.predict(r).unwrap(), &x, &y), 1.0 - errs.last().unwrap());
    }

    #[test]
    fn bagging_identity_resample_equals_tree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<[f64; 2]> = (0..60).map(|_| [rng.random(), rng.random()]).collect();
        let y: Vec<usize> = (0..60).map(|_| rng.random_range(0..3)).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let t = tree_train(&x, &y, 3, TreeParams::default()).unwrap();
        let b = bagging_from_resamples(&x, &y, 3, &[(0..60).collect()], TreeParams::default()).unwrap();
        assert_eq!(b.learners[0], t);
        for _ in 0..50 {
            let q = [rng.random::<f64>(), rng.random::<f64>()];
            assert_eq!(b.predict(&q).unwrap(), t.predict(&q));
        }
    }

    #[test]
    fn constant_learners_predict_constant() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let b = bagging_train(&x, &[2, 2, 2], 4, &BaggingParams { n_learners: 7, ..Default::default() }).unwrap();
        assert_eq!(b.predict(&[-5.0]).unwrap(), 2);
        assert_eq!(b.predict(&[50.0]).unwrap(), 2);
    }

    #[test]
    fn ensembles_are_seed_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rows: Vec<[f64; 2]> = (0..40).map(|_| [rng.random(), rng.random()]).collect();
        let y: Vec<usize> = (0..40).map(|_| rng.random_range(0..3)).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let p = BaggingParams { n_learners: 10, seed: 4, ..Default::default() };
        assert_eq!(bagging_train(&x, &y, 3, &p).unwrap(), bagging_train(&x, &y, 3, &p).unwrap());
    }
}
