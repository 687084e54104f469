//! Multi-class classifiers over feature rows. Labels are class indices in
//! `0..n_classes`; every prediction is the argmax of per-class scores with
//! ties going to the lowest class index.

mod kernel;
mod knn;
mod lda;
mod nb;
mod svm;
mod tree;

pub use kernel::{kernel_matrix, Kernel, KernelKind, KernelSpec, DEFAULT_MINKOWSKI_P};
pub use knn::{knn_train, Knn};
pub use lda::{lda_train, Lda};
pub use nb::{naive_bayes_train, NaiveBayes};
pub use svm::{ova_train, platt_calibrate, smo, svm_train, BinarySvm, DualSolution, OvaSvm, Platt, SvmParams};
pub use tree::{
    adaboost_train, bagging_from_resamples, bagging_train, tree_train, AdaBoostParams, BaggingParams,
    Ensemble, EnsembleKind, Node, Tree, TreeParams,
};

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::{Error, Result};

/// Index of the largest value; the first one on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable normalized exponentials.
pub fn softmax(v: &[f64]) -> Vec<f64> {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Configured classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ClassifierSpec {
    Svm { kernel: KernelSpec, params: SvmParams },
    Lda,
    Knn { k: usize },
    NaiveBayes,
    Tree { params: TreeParams },
    AdaBoost { params: AdaBoostParams },
    Bagging { params: BaggingParams },
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec::Svm {
            kernel: KernelSpec::default(),
            params: SvmParams::default(),
        }
    }
}

impl ClassifierSpec {
    pub fn name(&self) -> String {
        match self {
            ClassifierSpec::Svm { kernel, .. } => format!("svm/{}", kernel.kind),
            ClassifierSpec::Lda => "lda".into(),
            ClassifierSpec::Knn { k } => format!("knn/k={k}"),
            ClassifierSpec::NaiveBayes => "nb".into(),
            ClassifierSpec::Tree { .. } => "tree".into(),
            ClassifierSpec::AdaBoost { .. } => "adaboost".into(),
            ClassifierSpec::Bagging { .. } => "bagging".into(),
        }
    }

    pub fn train(&self, x: &Matrix, y: &[usize], n_classes: usize) -> Result<TrainedClassifier> {
        Ok(match self {
            ClassifierSpec::Svm { kernel, params } => {
                TrainedClassifier::Svm(ova_train(x, y, n_classes, kernel, params)?)
            }
            ClassifierSpec::Lda => TrainedClassifier::Lda(lda_train(x, y, n_classes)?),
            ClassifierSpec::Knn { k } => TrainedClassifier::Knn(knn_train(x, y, n_classes, *k)?),
            ClassifierSpec::NaiveBayes => {
                TrainedClassifier::NaiveBayes(naive_bayes_train(x, y, n_classes)?)
            }
            ClassifierSpec::Tree { params } => {
                TrainedClassifier::Tree(tree_train(x, y, n_classes, *params)?)
            }
            ClassifierSpec::AdaBoost { params } => {
                TrainedClassifier::Ensemble(adaboost_train(x, y, n_classes, params)?)
            }
            ClassifierSpec::Bagging { params } => {
                TrainedClassifier::Ensemble(bagging_train(x, y, n_classes, params)?)
            }
        })
    }
}

/// A fitted model; immutable and shareable across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrainedClassifier {
    Svm(OvaSvm),
    Lda(Lda),
    Knn(Knn),
    NaiveBayes(NaiveBayes),
    Tree(Tree),
    Ensemble(Ensemble),
}

impl TrainedClassifier {
    /// Per-class scores: Platt probabilities (SVM), discriminant values
    /// (LDA), posteriors (naive Bayes), leaf class fractions (tree) or vote
    /// fractions (KNN, ensembles).
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            TrainedClassifier::Svm(m) => m.scores(x),
            TrainedClassifier::Lda(m) => m.scores(x),
            TrainedClassifier::Knn(m) => m.scores(x),
            TrainedClassifier::NaiveBayes(m) => m.scores(x),
            TrainedClassifier::Tree(m) => m.scores(x),
            TrainedClassifier::Ensemble(m) => m.scores(x),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.scores(x)?))
    }

    /// Scores normalized to a distribution over classes.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        let s = self.scores(x)?;
        Ok(match self {
            TrainedClassifier::Lda(_) => softmax(&s),
            _ => {
                let t: f64 = s.iter().sum();
                if t > 0.0 {
                    s.iter().map(|v| v / t).collect()
                } else {
                    vec![1.0 / s.len() as f64; s.len()]
                }
            }
        })
    }

    pub fn predict_rows(&self, x: &Matrix) -> Result<Vec<usize>> {
        x.rows().map(|r| self.predict(r)).collect()
    }

    /// False when an iterative trainer stopped at its cap.
    pub fn converged(&self) -> bool {
        match self {
            TrainedClassifier::Svm(m) => m.converged(),
            _ => true,
        }
    }
}

impl std::str::FromStr for ClassifierSpec {
    type Err = Error;

    /// Method name with default parameters.
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "svm" => ClassifierSpec::default(),
            "lda" => ClassifierSpec::Lda,
            "knn" => ClassifierSpec::Knn { k: 1 },
            "nb" | "naive_bayes" | "bayes" => ClassifierSpec::NaiveBayes,
            "tree" => ClassifierSpec::Tree {
                params: TreeParams::default(),
            },
            "adaboost" | "boost" => ClassifierSpec::AdaBoost {
                params: AdaBoostParams::default(),
            },
            "bagging" | "bag" => ClassifierSpec::Bagging {
                params: BaggingParams::default(),
            },
            other => {
                return Err(Error::param(
                    "clf.method",
                    format!("unknown classifier `{other}`"),
                ))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureExtractor, FreqRange, WelchParams};
    use crate::signal::{synthesize, DatasetParams, SynthSpec};

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.2, 0.5, 0.5]), 1);
        assert_eq!(argmax(&[1.0, 1.0]), 0);
    }

    fn ssvep_features(seed: u64, snr: f64) -> (Matrix, Vec<usize>) {
        let spec = SynthSpec {
            n_subjects: 1,
            n_trials_per_freq: 20,
            snr_db: vec![snr],
            seed,
            channel_count: 1,
            ..Default::default()
        };
        let ds = synthesize(&spec, &DatasetParams::default()).unwrap();
        let fx = FeatureExtractor::Welch {
            params: WelchParams::default(),
            range: FreqRange::new(5.0, 26.0),
        };
        let rows: Vec<Vec<f64>> = ds
            .trials()
            .iter()
            .map(|t| fx.extract(t.channel(0).unwrap(), t.sample_rate()).unwrap())
            .collect();
        let y = ds.trials().iter().map(|t| ds.label_index(t.label()).unwrap()).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn ova_recovers_stimulus_frequency() {
        let (x, y) = ssvep_features(1, 0.0);
        let (tx, ty) = ssvep_features(2, 0.0);
        let m = ClassifierSpec::default().train(&x, &y, 5).unwrap();
        let pred = m.predict_rows(&tx).unwrap();
        let acc = pred.iter().zip(&ty).filter(|(a, b)| a == b).count() as f64 / ty.len() as f64;
        assert!(acc >= 0.95, "{acc}");
    }

    #[test]
    fn probabilities_normalized_for_every_model() {
        let (x, y) = ssvep_features(3, -5.0);
        let specs: Vec<ClassifierSpec> = ["svm", "lda", "knn", "nb", "tree", "adaboost", "bagging"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        for s in specs {
            let m = s.train(&x, &y, 5).unwrap();
            for r in x.rows().take(10) {
                let p = m.predict_proba(r).unwrap();
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6, "{}", s.name());
                assert_eq!(m.predict(r).unwrap(), m.predict(r).unwrap());
            }
        }
    }

    #[test]
    fn spearman_prediction_invariant_under_monotone_transform() {
        let (x, y) = ssvep_features(4, -5.0);
        let spec = ClassifierSpec::Svm {
            kernel: KernelSpec::new(KernelKind::Spearman),
            params: SvmParams::default(),
        };
        let f = |m: &Matrix| {
            Matrix::from_vec(m.nrows(), m.ncols(), m.as_slice().iter().map(|v| v.sqrt() + v.powi(3)).collect())
                .unwrap()
        };
        let (tx, _) = ssvep_features(5, -5.0);
        let a = spec.train(&x, &y, 5).unwrap().predict_rows(&tx).unwrap();
        let b = spec.train(&f(&x), &y, 5).unwrap().predict_rows(&f(&tx)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identical_classes_tie_deterministically() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [0.0], [1.0]]).unwrap();
        let m = ClassifierSpec::Knn { k: 4 }.train(&x, &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(m.predict(&[0.5]).unwrap(), 0);
    }
}
