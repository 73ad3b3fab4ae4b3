use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow, to_columns, RegressionTree, SplitRule};
use super::{normalized, BoostParams, ForestParams, TreeParams};
use crate::par;

/// Averaging ensemble: random forest (bootstrap + best splits) or extra
/// trees (full sample + random thresholds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub trees: Vec<RegressionTree>,
}

fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

impl TreeEnsemble {
    pub fn fit_random_forest(x: &[Vec<f64>], y: &[f64], params: &ForestParams, seed: u64) -> Self {
        let cols = to_columns(x);
        let n = y.len();
        let tp = params.tree();
        let trees = par::map((0..params.n_trees).collect(), |t| {
            let mut rng = tree_rng(seed, t);
            let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            grow(&cols, y, &rows, &tp, SplitRule::Best)
        });
        TreeEnsemble { trees }
    }

    pub fn fit_extra_trees(x: &[Vec<f64>], y: &[f64], params: &ForestParams, seed: u64) -> Self {
        let cols = to_columns(x);
        let rows: Vec<usize> = (0..y.len()).collect();
        let tp = params.tree();
        let trees = par::map((0..params.n_trees).collect(), |t| {
            let mut rng = tree_rng(seed, t);
            grow(&cols, y, &rows, &tp, SplitRule::Random(&mut rng))
        });
        TreeEnsemble { trees }
    }

    pub fn tree_predictions(&self, x: &[f64]) -> Vec<f64> {
        self.trees.iter().map(|t| t.predict_row(x)).collect()
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(x)).sum();
        sum / self.trees.len() as f64
    }

    /// Per-tree normalized impurity decrease, averaged, renormalized.
    pub fn importance(&self) -> Vec<f64> {
        let width = self.trees.first().map_or(0, |t| t.importance.len());
        let mut acc = vec![0.0; width];
        for t in &self.trees {
            for (a, v) in acc.iter_mut().zip(normalized(t.importance.clone())) {
                *a += v;
            }
        }
        normalized(acc)
    }
}

/// Least-squares gradient boosting: start at the mean, fit each round's tree
/// to the current residuals, add it scaled by the learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedTrees {
    pub init: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
}

impl BoostedTrees {
    pub fn fit(x: &[Vec<f64>], y: &[f64], params: &BoostParams) -> Self {
        let cols = to_columns(x);
        let n = y.len();
        let rows: Vec<usize> = (0..n).collect();
        let tp = TreeParams {
            max_depth: params.max_depth,
            min_samples_leaf: params.min_samples_leaf,
        };
        let init = y.iter().sum::<f64>() / n as f64;
        let mut pred = vec![init; n];
        let mut trees = Vec::with_capacity(params.n_rounds);
        let mut resid = vec![0.0; n];
        for _ in 0..params.n_rounds {
            for i in 0..n {
                resid[i] = y[i] - pred[i];
            }
            let tree = grow(&cols, &resid, &rows, &tp, SplitRule::Best);
            for (i, p) in pred.iter_mut().enumerate() {
                *p += params.learning_rate * tree.predict_row(&x[i]);
            }
            trees.push(tree);
        }
        BoostedTrees {
            init,
            learning_rate: params.learning_rate,
            trees,
        }
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.trees
            .iter()
            .fold(self.init, |acc, t| acc + self.learning_rate * t.predict_row(x))
    }

    pub fn importance(&self) -> Vec<f64> {
        let width = self.trees.first().map_or(0, |t| t.importance.len());
        let mut acc = vec![0.0; width];
        for t in &self.trees {
            for (a, v) in acc.iter_mut().zip(&t.importance) {
                *a += v;
            }
        }
        normalized(acc)
    }
}
