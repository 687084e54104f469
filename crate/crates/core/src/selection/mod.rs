//! Feature selection: greedy information-theoretic criteria over
//! discretized features, and PCA/SVD projections.

mod info;
mod projection;

pub use info::{
    conditional_mi, discretize, entropy, feast_select, joint, joint_entropy, mutual_information,
    Criterion, DiscreteFeatureMatrix, Discretizer, SelectionResult,
};
pub use projection::{pca_fit, svd_fit, Projection, ProjectionKind};

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::Result;

pub const DEFAULT_BINS: usize = 10;
pub const DEFAULT_SVD_D: usize = 90;

/// Configured selection stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum FeatureSelector {
    None,
    Feast {
        criterion: Criterion,
        d: usize,
        bins: usize,
    },
    Pca { d: usize },
    Svd { d: usize },
}

/// Selection fitted on one training fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FittedSelector {
    Identity,
    Columns(SelectionResult),
    Projection(Projection),
}

impl FeatureSelector {
    pub fn name(&self) -> &'static str {
        match self {
            FeatureSelector::None => "none",
            FeatureSelector::Feast { criterion, .. } => criterion.name(),
            FeatureSelector::Pca { .. } => "pca",
            FeatureSelector::Svd { .. } => "svd",
        }
    }

    /// Fits on training rows `x` with class indices `y`.
    pub fn fit(&self, x: &Matrix, y: &[usize]) -> Result<FittedSelector> {
        Ok(match self {
            FeatureSelector::None => FittedSelector::Identity,
            FeatureSelector::Feast { criterion, d, bins } => {
                let codes = discretize(x, *bins)?;
                FittedSelector::Columns(feast_select(&codes, y, *criterion, *d)?)
            }
            FeatureSelector::Pca { d } => FittedSelector::Projection(pca_fit(x, *d)?),
            FeatureSelector::Svd { d } => FittedSelector::Projection(svd_fit(x, *d)?),
        })
    }
}

impl FittedSelector {
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        match self {
            FittedSelector::Identity => Ok(x.clone()),
            FittedSelector::Columns(r) => {
                if let Some(&bad) = r.indices.iter().find(|&&i| i >= x.ncols()) {
                    return Err(crate::Error::IndexOutOfRange {
                        index: bad,
                        len: x.ncols(),
                    });
                }
                Ok(x.select_columns(&r.indices))
            }
            FittedSelector::Projection(p) => p.apply(x),
        }
    }

    /// Identifies the fitted state; see [`Projection::fingerprint`].
    pub fn fingerprint(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        match self {
            FittedSelector::Identity => 0,
            FittedSelector::Columns(r) => {
                let mut h = std::collections::hash_map::DefaultHasher::new();
                r.indices.hash(&mut h);
                h.finish()
            }
            FittedSelector::Projection(p) => p.fingerprint(),
        }
    }

    pub fn output_dim(&self, n_features: usize) -> usize {
        match self {
            FittedSelector::Identity => n_features,
            FittedSelector::Columns(r) => r.indices.len(),
            FittedSelector::Projection(p) => p.d,
        }
    }
}
