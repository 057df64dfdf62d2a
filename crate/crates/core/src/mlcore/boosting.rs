//! Binary gradient boosting on the log-loss.
//!
//! The raw score starts at the log-odds of the positive rate. Each stage fits
//! a regression tree to the residuals `y - p` and replaces every leaf value
//! by one Newton step, `sum(y - p) / sum(p (1 - p))` over the leaf's samples.

use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, Criterion, SortedColumns, Tree, TreeParams};
use super::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientBoostedTrees {
    pub init_score: f64,
    pub learning_rate: f64,
    trees: Vec<Tree>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoostingParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_split: usize,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl GradientBoostedTrees {
    /// `y` holds {0, 1}; callers route single-class data elsewhere.
    pub fn fit(x: &Matrix, y: &[f64], params: &BoostingParams) -> Self {
        let n = x.rows();
        let base = y.iter().sum::<f64>() / n as f64;
        let init_score = (base / (1.0 - base)).ln();
        let mut model = GradientBoostedTrees {
            init_score,
            learning_rate: params.learning_rate,
            trees: Vec::with_capacity(params.n_estimators),
        };
        let sorted = SortedColumns::new(x);
        let tree_params = TreeParams {
            criterion: Criterion::Variance,
            max_depth: Some(params.max_depth),
            min_samples_split: params.min_samples_split,
            max_features: None,
        };
        let ones = vec![1.0; n];
        let mut score = vec![init_score; n];
        let mut resid = vec![0.0; n];
        for _ in 0..params.n_estimators {
            let prob: Vec<f64> = score.iter().map(|&s| sigmoid(s)).collect();
            for i in 0..n {
                resid[i] = y[i] - prob[i];
            }
            let mut grown = grow_tree(x, &resid, &ones, &sorted, &tree_params, None);
            let n_nodes = grown.tree.nodes().len();
            let mut num = vec![0.0; n_nodes];
            let mut den = vec![0.0; n_nodes];
            for i in 0..n {
                let leaf = grown.leaf_of[i] as usize;
                num[leaf] += resid[i];
                den[leaf] += prob[i] * (1.0 - prob[i]);
            }
            for leaf in 0..n_nodes {
                let v = if den[leaf].abs() < 1e-150 { 0.0 } else { num[leaf] / den[leaf] };
                grown.tree.set_leaf_value(leaf, v);
            }
            for i in 0..n {
                let leaf = grown.leaf_of[i] as usize;
                score[i] += params.learning_rate * grown.tree.nodes()[leaf].leaf_value().unwrap_or(0.0);
            }
            model.trees.push(grown.tree);
        }
        model
    }

    pub fn n_stages(&self) -> usize {
        self.trees.len()
    }

    pub fn raw_score(&self, x: &[f64]) -> f64 {
        self.init_score + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.raw_score(x))
    }
}
