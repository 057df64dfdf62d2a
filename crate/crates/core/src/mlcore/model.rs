use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::boosting::{BoostingParams, GradientBoostedTrees};
use super::forest::{resolve_max_features, Forest, ForestParams};
use super::knn::{KnnModel, Metric};
use super::logistic::{LogisticModel, LogisticParams};
use super::tree::{grow_tree, Criterion, SortedColumns, Tree, TreeParams};
use super::{Dataset, Matrix};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    Knn,
    DecisionTree,
    RandomForest,
    GradientBoosting,
    LogisticRegression,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Knn,
        ModelKind::DecisionTree,
        ModelKind::RandomForest,
        ModelKind::GradientBoosting,
        ModelKind::LogisticRegression,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Knn => "knn",
            ModelKind::DecisionTree => "dt",
            ModelKind::RandomForest => "rf",
            ModelKind::GradientBoosting => "gb",
            ModelKind::LogisticRegression => "lr",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model kind `{s}` (knn, dt, rf, gb, lr)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Hyperparams {
    Knn {
        k: usize,
        metric: Metric,
    },
    DecisionTree {
        max_depth: Option<usize>,
        min_samples_split: usize,
    },
    RandomForest {
        n_estimators: usize,
        max_depth: Option<usize>,
        min_samples_split: usize,
        /// Fraction of dimensions tried per split; `None` = `sqrt(dims)`.
        max_features: Option<f64>,
    },
    GradientBoosting {
        n_estimators: usize,
        learning_rate: f64,
        max_depth: usize,
        min_samples_split: usize,
    },
    LogisticRegression {
        l2_strength: f64,
        max_iterations: usize,
        tolerance: f64,
    },
}

impl Hyperparams {
    pub fn kind(&self) -> ModelKind {
        match self {
            Hyperparams::Knn { .. } => ModelKind::Knn,
            Hyperparams::DecisionTree { .. } => ModelKind::DecisionTree,
            Hyperparams::RandomForest { .. } => ModelKind::RandomForest,
            Hyperparams::GradientBoosting { .. } => ModelKind::GradientBoosting,
            Hyperparams::LogisticRegression { .. } => ModelKind::LogisticRegression,
        }
    }

    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Knn => Hyperparams::Knn {
                k: 5,
                metric: Metric::Euclidean,
            },
            ModelKind::DecisionTree => Hyperparams::DecisionTree {
                max_depth: None,
                min_samples_split: 2,
            },
            ModelKind::RandomForest => Hyperparams::RandomForest {
                n_estimators: 100,
                max_depth: None,
                min_samples_split: 2,
                max_features: None,
            },
            ModelKind::GradientBoosting => Hyperparams::GradientBoosting {
                n_estimators: 100,
                learning_rate: 0.1,
                max_depth: 3,
                min_samples_split: 2,
            },
            ModelKind::LogisticRegression => Hyperparams::LogisticRegression {
                l2_strength: 1e-2,
                max_iterations: 1000,
                tolerance: 1e-6,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        match *self {
            Hyperparams::Knn { k, .. } if k == 0 => bad("knn k must be >= 1"),
            Hyperparams::DecisionTree { max_depth: Some(0), .. }
            | Hyperparams::RandomForest { max_depth: Some(0), .. }
            | Hyperparams::GradientBoosting { max_depth: 0, .. } => bad("max_depth must be >= 1"),
            Hyperparams::DecisionTree { min_samples_split, .. }
            | Hyperparams::RandomForest { min_samples_split, .. }
            | Hyperparams::GradientBoosting { min_samples_split, .. }
                if min_samples_split == 0 =>
            {
                bad("min_samples_split must be >= 1")
            }
            Hyperparams::RandomForest { n_estimators: 0, .. }
            | Hyperparams::GradientBoosting { n_estimators: 0, .. } => bad("n_estimators must be >= 1"),
            Hyperparams::RandomForest {
                max_features: Some(f), ..
            } if !(f > 0.0 && f <= 1.0) => bad("max_features fraction must be in (0, 1]"),
            Hyperparams::GradientBoosting { learning_rate, .. } if !(learning_rate > 0.0) => {
                bad("learning_rate must be > 0")
            }
            Hyperparams::LogisticRegression {
                l2_strength,
                max_iterations,
                tolerance,
            } if l2_strength < 0.0 || max_iterations == 0 || !(tolerance > 0.0) => {
                bad("logistic regression needs l2 >= 0, max_iterations >= 1, tolerance > 0")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Fitted {
    Constant { probability: f64 },
    Knn(KnnModel),
    Tree(Tree),
    Forest(Forest),
    Boosting(GradientBoostedTrees),
    Logistic(LogisticModel),
}

/// A fitted binary classifier of any kind behind one predict contract.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub hyperparams: Hyperparams,
    pub seed: u64,
    pub n_dims: usize,
    pub schema_fingerprint: Option<String>,
    /// Set when training data held one class only.
    pub constant: bool,
    fitted: Fitted,
}

/// Fits `hyperparams` on `data`. Deterministic in `(data, hyperparams, seed)`.
pub fn fit(hyperparams: &Hyperparams, data: &Dataset, seed: u64) -> Result<TrainedModel> {
    hyperparams.validate()?;
    let n = data.len();
    if n == 0 {
        return Err(Error::InsufficientData("cannot fit on an empty dataset".into()));
    }
    let x = &data.x;
    let positives = data.y.iter().filter(|&&v| v == 1).count();
    let yf: Vec<f64> = data.y.iter().map(|&v| f64::from(v)).collect();
    let fitted = if positives == 0 || positives == n {
        Fitted::Constant {
            probability: positives as f64 / n as f64,
        }
    } else {
        match *hyperparams {
            Hyperparams::Knn { k, metric } => Fitted::Knn(KnnModel::fit(x, &data.y, k, metric)),
            Hyperparams::DecisionTree {
                max_depth,
                min_samples_split,
            } => {
                let sorted = SortedColumns::new(x);
                let params = TreeParams {
                    criterion: Criterion::Gini,
                    max_depth,
                    min_samples_split,
                    max_features: None,
                };
                Fitted::Tree(grow_tree(x, &yf, &vec![1.0; n], &sorted, &params, None).tree)
            }
            Hyperparams::RandomForest {
                n_estimators,
                max_depth,
                min_samples_split,
                max_features,
            } => {
                let params = ForestParams {
                    n_estimators,
                    max_depth,
                    min_samples_split,
                    max_features: Some(resolve_max_features(max_features, x.cols())),
                    bootstrap: true,
                    criterion: Criterion::Gini,
                };
                Fitted::Forest(Forest::fit(x, &yf, &params, seed))
            }
            Hyperparams::GradientBoosting {
                n_estimators,
                learning_rate,
                max_depth,
                min_samples_split,
            } => Fitted::Boosting(GradientBoostedTrees::fit(
                x,
                &yf,
                &BoostingParams {
                    n_estimators,
                    learning_rate,
                    max_depth,
                    min_samples_split,
                },
            )),
            Hyperparams::LogisticRegression {
                l2_strength,
                max_iterations,
                tolerance,
            } => Fitted::Logistic(LogisticModel::fit(
                x,
                &yf,
                &LogisticParams {
                    l2: l2_strength,
                    max_iterations,
                    tolerance,
                },
            )),
        }
    };
    Ok(TrainedModel {
        kind: hyperparams.kind(),
        hyperparams: hyperparams.clone(),
        seed,
        n_dims: x.cols(),
        schema_fingerprint: None,
        constant: matches!(fitted, Fitted::Constant { .. }),
        fitted,
    })
}

impl TrainedModel {
    pub fn with_fingerprint(mut self, fingerprint: impl Into<String>) -> Self {
        self.schema_fingerprint = Some(fingerprint.into());
        self
    }

    fn proba_one(&self, x: &[f64]) -> f64 {
        let p = match &self.fitted {
            Fitted::Constant { probability } => *probability,
            Fitted::Knn(m) => m.predict_proba(x),
            Fitted::Tree(t) => t.predict(x),
            Fitted::Forest(f) => f.predict(x),
            Fitted::Boosting(b) => b.predict_proba(x),
            Fitted::Logistic(l) => l.predict_proba(x),
        };
        p.clamp(0.0, 1.0)
    }

    /// Probability of label 1 per row.
    pub fn predict_proba(&self, rows: &Matrix) -> Result<Vec<f64>> {
        if rows.cols() != self.n_dims && rows.rows() > 0 {
            return Err(Error::Contract(format!(
                "rows have width {}, model expects {}",
                rows.cols(),
                self.n_dims
            )));
        }
        Ok((0..rows.rows())
            .into_par_iter()
            .map(|i| self.proba_one(rows.row(i)))
            .collect())
    }

    /// Label 1 iff probability >= 0.5.
    pub fn predict(&self, rows: &Matrix) -> Result<Vec<u8>> {
        Ok(self
            .predict_proba(rows)?
            .into_iter()
            .map(|p| u8::from(p >= 0.5))
            .collect())
    }

    pub fn check_fingerprint(&self, fingerprint: &str) -> Result<()> {
        match &self.schema_fingerprint {
            Some(fp) if fp != fingerprint => Err(Error::Contract(format!(
                "model trained on schema {fp}, rows built with {fingerprint}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// The underlying forest, when this is a random forest.
    pub fn forest(&self) -> Option<&Forest> {
        match &self.fitted {
            Fitted::Forest(f) => Some(f),
            _ => None,
        }
    }
}
