use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, Criterion, SortedColumns, Tree, TreeParams};
use super::Matrix;
use crate::seed::{self, stream};

/// Bagged CART ensemble. Tree `t` uses the seed `child(master, TREE, t)`,
/// so the fitted forest does not depend on the worker count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub criterion: Criterion,
    trees: Vec<Tree>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Candidate dimensions per split; `None` means all.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub criterion: Criterion,
}

/// Per-split dimension count for a fraction, or `floor(sqrt(dims))` by default.
pub fn resolve_max_features(fraction: Option<f64>, dims: usize) -> usize {
    let m = match fraction {
        Some(f) => (f * dims as f64).round() as usize,
        None => (dims as f64).sqrt().floor() as usize,
    };
    m.clamp(1, dims.max(1))
}

impl Forest {
    pub fn fit(x: &Matrix, y: &[f64], params: &ForestParams, master_seed: u64) -> Forest {
        let sorted = SortedColumns::new(x);
        let tree_params = TreeParams {
            criterion: params.criterion,
            max_depth: params.max_depth,
            min_samples_split: params.min_samples_split,
            max_features: params.max_features,
        };
        let n = x.rows();
        let trees = (0..params.n_estimators)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::rng(seed::child(master_seed, stream::TREE, t as u64));
                let weights = if params.bootstrap {
                    let mut w = vec![0.0; n];
                    for _ in 0..n {
                        w[rng.gen_range(0..n)] += 1.0;
                    }
                    w
                } else {
                    vec![1.0; n]
                };
                grow_tree(x, y, &weights, &sorted, &tree_params, Some(&mut rng)).tree
            })
            .collect();
        Forest {
            criterion: params.criterion,
            trees,
        }
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Mean of the trees' leaf values (class-1 probability under Gini).
    pub fn predict(&self, x: &[f64]) -> f64 {
        if self.trees.is_empty() {
            return 0.0;
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        sum / self.trees.len() as f64
    }
}
