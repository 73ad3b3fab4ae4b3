//! Native regression zoo, cross-validation and per-preset model selection.
//!
//! Every family fits on plain row-major feature rows (`&[Vec<f64>]`). A
//! [`TrainedModel`] remembers which input columns it was fit on, so callers
//! always pass the full feature layout to [`predict`].

mod bundle;
mod cv;
mod ensemble;
mod knn;
mod linear;
mod metrics;
mod select;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bundle::{load_bundle, read_bundle, save_bundle, write_bundle, BUNDLE_FORMAT, BUNDLE_SCHEMA_VERSION};
pub use cv::{kfold_cv, kfold_cv_masked, kfold_indices, CvReport};
pub use ensemble::{BoostedTrees, TreeEnsemble};
pub use knn::KnnModel;
pub use linear::LinearModel;
pub use metrics::{compute_metrics, Metrics, MIN_ABS_TARGET};
pub use select::{
    derive_seed, evaluate_bundle, select_best_model, select_best_model_masked, train_all_presets, BundleEntry,
    Candidate, PresetModelBundle, Selection, TrainingReport, TrainingRow,
};
pub use tree::RegressionTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Linear,
    Ridge,
    Lasso,
    ElasticNet,
    Huber,
    Knn,
    DecisionTree,
    RandomForest,
    ExtraTrees,
    GradientBoosting,
}

impl Family {
    /// Canonical order; also the tie-break order for model selection.
    pub const ALL: [Family; 10] = [
        Family::Linear,
        Family::Ridge,
        Family::Lasso,
        Family::ElasticNet,
        Family::Huber,
        Family::Knn,
        Family::DecisionTree,
        Family::RandomForest,
        Family::ExtraTrees,
        Family::GradientBoosting,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Linear => "linear",
            Family::Ridge => "ridge",
            Family::Lasso => "lasso",
            Family::ElasticNet => "elastic_net",
            Family::Huber => "huber",
            Family::Knn => "knn",
            Family::DecisionTree => "decision_tree",
            Family::RandomForest => "random_forest",
            Family::ExtraTrees => "extra_trees",
            Family::GradientBoosting => "gradient_boosting",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Family::Linear => "Linear Regression",
            Family::Ridge => "Ridge Regression",
            Family::Lasso => "Lasso Regression",
            Family::ElasticNet => "Elastic Net",
            Family::Huber => "Huber Regressor",
            Family::Knn => "K Neighbors Regressor",
            Family::DecisionTree => "Decision Tree Regressor",
            Family::RandomForest => "Random Forest Regressor",
            Family::ExtraTrees => "Extra Trees Regressor",
            Family::GradientBoosting => "Gradient Boosting Regressor",
        }
    }

    pub fn is_linear(self) -> bool {
        matches!(
            self,
            Family::Linear | Family::Ridge | Family::Lasso | Family::ElasticNet | Family::Huber
        )
    }

    fn min_samples(self) -> usize {
        match self {
            Family::Knn => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown model family `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl ForestParams {
    pub fn tree(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

/// Family plus its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Hyperparams {
    Linear,
    /// Penalty `alpha * ||w||^2` on standardized coefficients.
    Ridge {
        alpha: f64,
    },
    /// Objective `1/(2n) ||r||^2 + alpha ||w||_1`, coordinate descent.
    Lasso {
        alpha: f64,
        max_iter: usize,
        tol: f64,
    },
    ElasticNet {
        alpha: f64,
        l1_ratio: f64,
        max_iter: usize,
        tol: f64,
    },
    /// `delta` is in units of the robust (MAD) residual scale.
    Huber {
        delta: f64,
        max_iter: usize,
    },
    /// Inverse-distance weighted over standardized features.
    Knn {
        k: usize,
    },
    DecisionTree(TreeParams),
    RandomForest(ForestParams),
    ExtraTrees(ForestParams),
    GradientBoosting(BoostParams),
}

const DEFAULT_FOREST: ForestParams = ForestParams {
    n_trees: 100,
    max_depth: 12,
    min_samples_leaf: 2,
};

impl Hyperparams {
    pub fn default_for(family: Family) -> Self {
        match family {
            Family::Linear => Hyperparams::Linear,
            Family::Ridge => Hyperparams::Ridge { alpha: 1.0 },
            Family::Lasso => Hyperparams::Lasso {
                alpha: 0.001,
                max_iter: 5000,
                tol: 1e-7,
            },
            Family::ElasticNet => Hyperparams::ElasticNet {
                alpha: 0.001,
                l1_ratio: 0.5,
                max_iter: 5000,
                tol: 1e-7,
            },
            Family::Huber => Hyperparams::Huber {
                delta: 1.0,
                max_iter: 50,
            },
            Family::Knn => Hyperparams::Knn { k: 5 },
            Family::DecisionTree => Hyperparams::DecisionTree(DEFAULT_FOREST.tree()),
            Family::RandomForest => Hyperparams::RandomForest(DEFAULT_FOREST),
            Family::ExtraTrees => Hyperparams::ExtraTrees(DEFAULT_FOREST),
            Family::GradientBoosting => Hyperparams::GradientBoosting(BoostParams {
                n_rounds: 200,
                learning_rate: 0.05,
                max_depth: 4,
                min_samples_leaf: 1,
            }),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Hyperparams::Linear => Family::Linear,
            Hyperparams::Ridge { .. } => Family::Ridge,
            Hyperparams::Lasso { .. } => Family::Lasso,
            Hyperparams::ElasticNet { .. } => Family::ElasticNet,
            Hyperparams::Huber { .. } => Family::Huber,
            Hyperparams::Knn { .. } => Family::Knn,
            Hyperparams::DecisionTree(_) => Family::DecisionTree,
            Hyperparams::RandomForest(_) => Family::RandomForest,
            Hyperparams::ExtraTrees(_) => Family::ExtraTrees,
            Hyperparams::GradientBoosting(_) => Family::GradientBoosting,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::invalid(format!("{}: {msg}", self.family())));
        let tree_ok = |t: &TreeParams| t.max_depth >= 1 && t.min_samples_leaf >= 1;
        match self {
            Hyperparams::Linear => Ok(()),
            Hyperparams::Ridge { alpha } if !(*alpha >= 0.0) => bad("alpha must be >= 0"),
            Hyperparams::Lasso { alpha, max_iter, tol } if !(*alpha >= 0.0 && *max_iter > 0 && *tol > 0.0) => {
                bad("alpha >= 0, max_iter > 0 and tol > 0 required")
            }
            Hyperparams::ElasticNet {
                alpha,
                l1_ratio,
                max_iter,
                tol,
            } if !(*alpha >= 0.0 && (0.0..=1.0).contains(l1_ratio) && *max_iter > 0 && *tol > 0.0) => {
                bad("alpha >= 0, l1_ratio in [0, 1], max_iter > 0 and tol > 0 required")
            }
            Hyperparams::Huber { delta, max_iter } if !(*delta > 0.0 && *max_iter > 0) => {
                bad("delta > 0 and max_iter > 0 required")
            }
            Hyperparams::Knn { k } if *k == 0 => bad("k must be >= 1"),
            Hyperparams::DecisionTree(t) if !tree_ok(t) => bad("max_depth and min_samples_leaf must be >= 1"),
            Hyperparams::RandomForest(f) | Hyperparams::ExtraTrees(f) if f.n_trees == 0 || !tree_ok(&f.tree()) => {
                bad("n_trees, max_depth and min_samples_leaf must be >= 1")
            }
            Hyperparams::GradientBoosting(b)
                if b.n_rounds == 0 || !(b.learning_rate > 0.0) || b.max_depth == 0 || b.min_samples_leaf == 0 =>
            {
                bad("n_rounds, max_depth, min_samples_leaf >= 1 and learning_rate > 0 required")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub params: Hyperparams,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(params: Hyperparams, seed: u64) -> Self {
        ModelSpec { params, seed }
    }

    pub fn default_for(family: Family, seed: u64) -> Self {
        ModelSpec::new(Hyperparams::default_for(family), seed)
    }

    /// One default spec per family, in canonical order.
    pub fn zoo(seed: u64) -> Vec<ModelSpec> {
        Family::ALL.iter().map(|f| ModelSpec::default_for(*f, seed)).collect()
    }

    pub fn family(&self) -> Family {
        self.params.family()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelState {
    Linear(LinearModel),
    Knn(KnnModel),
    Tree(RegressionTree),
    Ensemble(TreeEnsemble),
    Boosted(BoostedTrees),
}

impl ModelState {
    fn predict_row(&self, x: &[f64]) -> f64 {
        match self {
            ModelState::Linear(m) => m.predict_row(x),
            ModelState::Knn(m) => m.predict_row(x),
            ModelState::Tree(t) => t.predict_row(x),
            ModelState::Ensemble(e) => e.predict_row(x),
            ModelState::Boosted(b) => b.predict_row(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    /// Which input columns the model reads; length is the full input width.
    pub feature_mask: Vec<bool>,
    pub state: ModelState,
}

impl TrainedModel {
    pub fn family(&self) -> Family {
        self.spec.family()
    }

    pub fn input_width(&self) -> usize {
        self.feature_mask.len()
    }

    pub fn active_features(&self) -> Vec<usize> {
        active_columns(&self.feature_mask)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.feature_mask.len() {
            return Err(Error::Dimension {
                expected: self.feature_mask.len(),
                actual: x.len(),
            });
        }
        let projected: Vec<f64> = x
            .iter()
            .zip(&self.feature_mask)
            .filter_map(|(v, keep)| keep.then_some(*v))
            .collect();
        Ok(self.state.predict_row(&projected))
    }

    pub fn predict_many(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.predict(r)).collect()
    }

    /// Importance the model can report without extra data: normalized impurity
    /// decrease for tree families, |standardized coefficient| for the
    /// penalized/ordinary least squares families. Indexed by active feature.
    pub fn native_importance(&self) -> Option<Vec<f64>> {
        match (&self.state, self.family()) {
            (_, Family::Huber | Family::Knn) => None,
            (ModelState::Linear(m), _) => Some(m.coef.iter().map(|c| c.abs()).collect()),
            (ModelState::Tree(t), _) => Some(normalized(t.importance.clone())),
            (ModelState::Ensemble(e), _) => Some(e.importance()),
            (ModelState::Boosted(b), _) => Some(b.importance()),
            _ => None,
        }
    }
}

/// Shorthand for [`TrainedModel::predict`].
pub fn predict(model: &TrainedModel, x: &[f64]) -> Result<f64> {
    model.predict(x)
}

pub(crate) fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    } else {
        v.iter_mut().for_each(|x| *x = 0.0);
    }
    v
}

pub fn active_columns(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter_map(|(i, k)| k.then_some(i)).collect()
}

pub(crate) fn project(rows: &[Vec<f64>], cols: &[usize]) -> Vec<Vec<f64>> {
    rows.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect()
}

pub fn fit(spec: &ModelSpec, x: &[Vec<f64>], y: &[f64]) -> Result<TrainedModel> {
    let width = x.first().map_or(0, Vec::len);
    fit_masked(spec, x, y, &vec![true; width])
}

/// Fits on the columns of `x` selected by `mask`.
pub fn fit_masked(spec: &ModelSpec, x: &[Vec<f64>], y: &[f64], mask: &[bool]) -> Result<TrainedModel> {
    let family = spec.family();
    spec.params.validate()?;
    if x.len() != y.len() {
        return Err(Error::invalid(format!("{} rows but {} targets", x.len(), y.len())));
    }
    if x.len() < family.min_samples() {
        return Err(Error::Fit {
            family: family.name(),
            message: format!("needs at least {} samples, got {}", family.min_samples(), x.len()),
        });
    }
    if let Some((i, r)) = x.iter().enumerate().find(|(_, r)| r.len() != mask.len()) {
        return Err(Error::invalid(format!(
            "row {i} has {} features, mask has {}",
            r.len(),
            mask.len()
        )));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("training data contains non-finite values"));
    }
    let cols = active_columns(mask);
    if cols.is_empty() {
        return Err(Error::invalid("feature mask selects no columns"));
    }
    let xs = project(x, &cols);
    let fit_err = |message: String| Error::Fit {
        family: family.name(),
        message,
    };
    let state = match spec.params {
        Hyperparams::Linear => ModelState::Linear(LinearModel::fit_ols(&xs, y).map_err(fit_err)?),
        Hyperparams::Ridge { alpha } => ModelState::Linear(LinearModel::fit_ridge(&xs, y, alpha).map_err(fit_err)?),
        Hyperparams::Lasso { alpha, max_iter, tol } => {
            ModelState::Linear(LinearModel::fit_elastic_net(&xs, y, alpha, 1.0, max_iter, tol))
        }
        Hyperparams::ElasticNet {
            alpha,
            l1_ratio,
            max_iter,
            tol,
        } => ModelState::Linear(LinearModel::fit_elastic_net(&xs, y, alpha, l1_ratio, max_iter, tol)),
        Hyperparams::Huber { delta, max_iter } => {
            ModelState::Linear(LinearModel::fit_huber(&xs, y, delta, max_iter).map_err(fit_err)?)
        }
        Hyperparams::Knn { k } => ModelState::Knn(KnnModel::fit(&xs, y, k)),
        Hyperparams::DecisionTree(p) => ModelState::Tree(RegressionTree::fit_best(&xs, y, &p)),
        Hyperparams::RandomForest(p) => ModelState::Ensemble(TreeEnsemble::fit_random_forest(&xs, y, &p, spec.seed)),
        Hyperparams::ExtraTrees(p) => ModelState::Ensemble(TreeEnsemble::fit_extra_trees(&xs, y, &p, spec.seed)),
        Hyperparams::GradientBoosting(p) => ModelState::Boosted(BoostedTrees::fit(&xs, y, &p)),
    };
    Ok(TrainedModel {
        spec: *spec,
        feature_mask: mask.to_vec(),
        state,
    })
}
