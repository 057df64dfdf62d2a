//! Classifiers, PCA, metrics and cross-validation splits.

pub mod boosting;
pub mod forest;
pub mod knn;
pub mod logistic;
mod matrix;
pub mod metrics;
mod model;
pub mod pca;
pub mod tree;

use serde::{Deserialize, Serialize};

pub use knn::Metric;
pub use matrix::Matrix;
pub use metrics::{f1_score, k_fold_split, mean, mean_absolute_error, Fold};
pub use model::{fit, Hyperparams, ModelKind, TrainedModel};
pub use pca::{fit_pca, PcaModel};

use crate::corpus::LangCode;
use crate::error::{Error, Result};

/// Identifies the (language, feature) cell a dataset row was built from.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RowKey {
    pub lang: LangCode,
    pub feat_id: String,
}

/// Binary-labelled feature rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<u8>,
    /// Empty, or one key per row.
    pub keys: Vec<RowKey>,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<u8>, keys: Vec<RowKey>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::InvalidArgument(format!("{} rows but {} labels", x.rows(), y.len())));
        }
        if !keys.is_empty() && keys.len() != y.len() {
            return Err(Error::InvalidArgument(format!("{} keys for {} rows", keys.len(), y.len())));
        }
        if y.iter().any(|&v| v > 1) {
            return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
        }
        if !x.is_finite() {
            return Err(Error::InvalidArgument("dataset contains NaN or infinite values".into()));
        }
        Ok(Dataset { x, y, keys })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            keys: if self.keys.is_empty() {
                Vec::new()
            } else {
                idx.iter().map(|&i| self.keys[i].clone()).collect()
            },
        }
    }
}
