//! Recursive feature elimination with cross-validation, per-model feature
//! importance and the cross-preset inverse-rank indicator.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::features::FEATURE_NAMES;
use crate::par;
use crate::preset::{Preset, PresetMap};
use crate::regression::{
    active_columns, compute_metrics, derive_seed, fit_masked, kfold_cv_masked, BundleEntry, CvReport, ModelSpec,
    PresetModelBundle, TrainedModel,
};

/// Shuffles per feature for permutation importance.
pub const PERMUTATION_REPEATS: usize = 5;

/// Importance of a model's active features, in canonical feature order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    /// Canonical indices of the features the model reads.
    pub features: Vec<usize>,
    pub scores: Vec<f64>,
    /// 1 = most important. Equal scores rank the earlier feature higher.
    pub ranks: Vec<usize>,
}

impl ImportanceReport {
    pub fn from_scores(features: Vec<usize>, scores: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(features[a].cmp(&features[b])));
        let mut ranks = vec![0; scores.len()];
        for (r, &i) in order.iter().enumerate() {
            ranks[i] = r + 1;
        }
        ImportanceReport {
            features,
            scores,
            ranks,
        }
    }

    /// Position of the feature to drop next: lowest score, later feature on ties.
    fn weakest(&self) -> usize {
        let mut weakest = 0;
        for i in 1..self.scores.len() {
            let (s, w) = (self.scores[i], self.scores[weakest]);
            if s < w || (s == w && self.features[i] > self.features[weakest]) {
                weakest = i;
            }
        }
        weakest
    }
}

/// Native importance where the family has one, otherwise permutation
/// importance: mean MAPE increase over [`PERMUTATION_REPEATS`] shuffles of
/// each column, clamped at zero.
pub fn feature_importance(model: &TrainedModel, x: &[Vec<f64>], y: &[f64], seed: u64) -> Result<ImportanceReport> {
    if let Some(r) = x.iter().find(|r| r.len() != model.input_width()) {
        return Err(Error::Dimension {
            expected: model.input_width(),
            actual: r.len(),
        });
    }
    let features = model.active_features();
    let scores = match model.native_importance() {
        Some(s) => s,
        None => permutation_importance(model, x, y, &features, seed)?,
    };
    Ok(ImportanceReport::from_scores(features, scores))
}

fn permutation_importance(
    model: &TrainedModel,
    x: &[Vec<f64>],
    y: &[f64],
    features: &[usize],
    seed: u64,
) -> Result<Vec<f64>> {
    let base = compute_metrics(y, &model.predict_many(x)?)?.mape;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scores = Vec::with_capacity(features.len());
    let mut shuffled = x.to_vec();
    for &f in features {
        let mut column: Vec<f64> = x.iter().map(|r| r[f]).collect();
        let mut total = 0.0;
        for _ in 0..PERMUTATION_REPEATS {
            column.shuffle(&mut rng);
            for (row, v) in shuffled.iter_mut().zip(&column) {
                row[f] = *v;
            }
            total += compute_metrics(y, &model.predict_many(&shuffled)?)?.mape - base;
        }
        for (row, orig) in shuffled.iter_mut().zip(x) {
            row[f] = orig[f];
        }
        scores.push((total / PERMUTATION_REPEATS as f64).max(0.0));
    }
    Ok(scores)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub size: usize,
    /// Negative mean CV MAPE; higher is better.
    pub score: f64,
    pub cv: CvReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfecvResult {
    pub selected_mask: Vec<bool>,
    /// One point per subset size, from the full set down to one feature.
    pub score_curve: Vec<CurvePoint>,
    pub best_size: usize,
    /// Canonical feature indices, first removed first.
    pub elimination_order: Vec<usize>,
    /// Importance from the full-feature fit.
    pub initial_importance: ImportanceReport,
}

impl RfecvResult {
    pub fn score_at(&self, size: usize) -> Option<f64> {
        self.score_curve.iter().find(|p| p.size == size).map(|p| p.score)
    }

    pub fn best(&self) -> &CurvePoint {
        self.score_curve
            .iter()
            .find(|p| p.size == self.best_size)
            .expect("best size is on the curve")
    }

    pub fn full(&self) -> &CurvePoint {
        &self.score_curve[0]
    }
}

/// Eliminates one feature per round, starting from every column of `x`.
/// Each round scores the current set by k-fold CV, then refits on all rows
/// and drops the least important feature. The best size is the curve's
/// argmax, with ties going to the larger subset.
pub fn rfecv(spec: &ModelSpec, x: &[Vec<f64>], y: &[f64], k: usize, seed: u64) -> Result<RfecvResult> {
    let width = x.first().map_or(0, Vec::len);
    if width == 0 {
        return Err(Error::invalid("feature elimination needs at least one feature"));
    }
    let mut mask = vec![true; width];
    let mut curve = Vec::with_capacity(width);
    let mut elimination_order = Vec::with_capacity(width);
    let mut initial_importance = None;
    for size in (1..=width).rev() {
        let cv = kfold_cv_masked(spec, x, y, &mask, k, seed)?;
        curve.push(CurvePoint {
            size,
            score: -cv.mean.mape,
            cv,
        });
        if size == 1 && initial_importance.is_some() {
            break;
        }
        let model = fit_masked(spec, x, y, &mask)?;
        let importance = feature_importance(&model, x, y, seed)?;
        if size > 1 {
            let drop = importance.features[importance.weakest()];
            mask[drop] = false;
            elimination_order.push(drop);
        }
        initial_importance.get_or_insert(importance);
    }
    let best_size = curve
        .iter()
        .fold(None::<&CurvePoint>, |best, p| match best {
            Some(b) if b.score >= p.score => Some(b),
            _ => Some(p),
        })
        .map(|p| p.size)
        .expect("curve is non-empty");
    let mut selected_mask = vec![true; width];
    for &f in &elimination_order[..width - best_size] {
        selected_mask[f] = false;
    }
    Ok(RfecvResult {
        selected_mask,
        score_curve: curve,
        best_size,
        elimination_order,
        initial_importance: initial_importance.expect("at least one round ran"),
    })
}

/// `1 / rank` for each feature (rows) and preset (columns, in input order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorTable {
    pub features: Vec<usize>,
    pub presets: Vec<Preset>,
    pub values: Vec<Vec<f64>>,
}

impl IndicatorTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature");
        for p in &self.presets {
            write!(out, ",{p}").unwrap();
        }
        out.push('\n');
        for (row, &f) in self.values.iter().zip(&self.features) {
            out.push_str(FEATURE_NAMES[f]);
            for v in row {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

pub fn cross_preset_indicator(rankings: &[(Preset, ImportanceReport)]) -> Result<IndicatorTable> {
    let Some((_, first)) = rankings.first() else {
        return Err(Error::invalid("no importance reports given"));
    };
    let features = first.features.clone();
    if let Some((p, _)) = rankings.iter().find(|(_, r)| r.features != features) {
        return Err(Error::Schema(format!(
            "importance report for {p} uses a different feature layout"
        )));
    }
    let values = (0..features.len())
        .map(|i| rankings.iter().map(|(_, r)| 1.0 / r.ranks[i] as f64).collect())
        .collect();
    Ok(IndicatorTable {
        features,
        presets: rankings.iter().map(|(p, _)| *p).collect(),
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatselRow {
    pub preset: Preset,
    pub n_selected: usize,
    pub n_total: usize,
    pub mape_before: f64,
    pub mape_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatselReport {
    pub rows: Vec<FeatselRow>,
    pub mean_selected: f64,
    pub mean_before: f64,
    pub mean_after: f64,
}

impl FeatselReport {
    pub fn new(rows: Vec<FeatselRow>) -> Self {
        let n = rows.len() as f64;
        let mean = |f: fn(&FeatselRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
        FeatselReport {
            mean_selected: mean(|r| r.n_selected as f64),
            mean_before: mean(|r| r.mape_before),
            mean_after: mean(|r| r.mape_after),
            rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatselOutcome {
    pub bundle: PresetModelBundle,
    pub report: FeatselReport,
    pub rfecv: PresetMap<RfecvResult>,
    pub indicator: IndicatorTable,
}

/// Runs RFECV per preset with that preset's winning spec, refits on the
/// selected columns and reports MAPE before and after. Both MAPE columns are
/// read from the same elimination sweep, so "after" is never worse.
pub fn retrain_with_selected(
    bundle: &PresetModelBundle,
    dataset: &Dataset,
    k: usize,
    seed: u64,
) -> Result<FeatselOutcome> {
    dataset.require_all_presets()?;
    let runs = par::map(Preset::ALL.to_vec(), |preset| {
        let entry = bundle.entry(preset);
        let spec = ModelSpec::new(entry.model.spec.params, derive_seed(seed, preset.ordinal() as u64));
        let (x, y) = dataset.xy_for(preset);
        let result = rfecv(&spec, &x, &y, k, spec.seed).map_err(|e| e.context(format!("preset {preset}")))?;
        let model = fit_masked(&spec, &x, &y, &result.selected_mask)?;
        let new_entry = BundleEntry {
            preset,
            model,
            cv: result.best().cv.clone(),
        };
        Ok((preset, (new_entry, result)))
    });
    let runs = PresetMap::try_from_pairs(runs.into_iter().collect::<Result<Vec<_>>>()?)?;
    let rows = runs
        .iter()
        .map(|(preset, (_, r))| FeatselRow {
            preset,
            n_selected: r.best_size,
            n_total: r.selected_mask.len(),
            mape_before: -r.full().score,
            mape_after: -r.best().score,
        })
        .collect();
    let rankings: Vec<(Preset, ImportanceReport)> = runs
        .iter()
        .map(|(p, (_, r))| (p, r.initial_importance.clone()))
        .collect();
    let indicator = cross_preset_indicator(&rankings)?;
    let (entries, results): (Vec<_>, Vec<_>) = runs.0.into_iter().unzip();
    Ok(FeatselOutcome {
        bundle: PresetModelBundle::new(PresetMap::try_from_pairs(Preset::ALL.into_iter().zip(entries))?),
        report: FeatselReport::new(rows),
        rfecv: PresetMap::try_from_pairs(Preset::ALL.into_iter().zip(results))?,
        indicator,
    })
}

/// Long-format score curves: `preset,size,neg_mean_cv_mape`.
pub fn curves_csv(results: &PresetMap<RfecvResult>) -> String {
    let mut out = String::from("preset,size,neg_mean_cv_mape\n");
    for (p, r) in results.iter() {
        for pt in &r.score_curve {
            writeln!(out, "{p},{},{}", pt.size, pt.score).unwrap();
        }
    }
    out
}

/// Whether every canonical feature index in `cols` is kept by `mask`.
pub fn mask_contains(mask: &[bool], cols: &[usize]) -> bool {
    let active = active_columns(mask);
    cols.iter().all(|c| active.contains(c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::{fit, Family, Hyperparams};
    use rand::Rng;

    fn informative_plus_noise(n: usize, noise_cols: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let row: Vec<f64> = (0..3 + noise_cols).map(|_| rng.gen_range(0.0..1.0)).collect();
            y.push(10.0 + 4.0 * row[0] + 3.0 * row[1] + 2.0 * row[2] + rng.gen_range(-0.05..0.05));
            x.push(row);
        }
        (x, y)
    }

    #[test]
    fn ranks_and_weakest() {
        let r = ImportanceReport::from_scores(vec![0, 2, 5], vec![0.2, 0.5, 0.2]);
        assert_eq!(r.ranks, vec![2, 1, 3]);
        assert_eq!(r.features[r.weakest()], 5);
    }

    #[test]
    fn linear_importance_tracks_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<Vec<f64>> = (0..60)
            .map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])
            .collect();
        let y: Vec<f64> = x
            .iter()
            .map(|r| 1.0 + 5.0 * r[0] + rng.gen_range(-1e-3..1e-3))
            .collect();
        let m = fit(&ModelSpec::default_for(Family::Linear, 0), &x, &y).unwrap();
        let imp = feature_importance(&m, &x, &y, 0).unwrap();
        assert!(imp.scores[0] > imp.scores[1]);
        assert_eq!(imp.ranks, vec![1, 2]);
    }

    #[test]
    fn permutation_importance_for_knn() {
        let (x, y) = informative_plus_noise(80, 2, 2);
        let m = fit(&ModelSpec::default_for(Family::Knn, 0), &x, &y).unwrap();
        let imp = feature_importance(&m, &x, &y, 3).unwrap();
        assert!(imp.scores.iter().all(|s| *s >= 0.0));
        assert!(imp.scores[0] > imp.scores[3] && imp.scores[0] > imp.scores[4]);
        assert_eq!(imp, feature_importance(&m, &x, &y, 3).unwrap());
    }

    #[test]
    fn tree_importance_on_constant_target() {
        let (x, _) = informative_plus_noise(40, 2, 3);
        let y = vec![4.0; 40];
        let m = fit(&ModelSpec::default_for(Family::DecisionTree, 0), &x, &y).unwrap();
        let imp = feature_importance(&m, &x, &y, 0).unwrap();
        assert!(imp.scores.iter().all(|s| *s == 0.0));
        let (x, y) = informative_plus_noise(40, 2, 4);
        let m = fit(&ModelSpec::default_for(Family::DecisionTree, 0), &x, &y).unwrap();
        let total: f64 = feature_importance(&m, &x, &y, 0).unwrap().scores.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn importance_layout_mismatch() {
        let (x, y) = informative_plus_noise(30, 1, 5);
        let m = fit(&ModelSpec::default_for(Family::Linear, 0), &x, &y).unwrap();
        let narrow: Vec<Vec<f64>> = x.iter().map(|r| r[..2].to_vec()).collect();
        assert!(feature_importance(&m, &narrow, &y, 0).is_err());
    }

    #[test]
    fn single_feature_input() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| 1.0 + i as f64).collect();
        let r = rfecv(&ModelSpec::default_for(Family::Linear, 0), &x, &y, 5, 0).unwrap();
        assert_eq!(r.selected_mask, vec![true]);
        assert_eq!(r.score_curve.len(), 1);
        assert_eq!(r.best_size, 1);
        assert!(r.elimination_order.is_empty());
    }

    #[test]
    fn recovers_informative_linear() {
        let (x, y) = informative_plus_noise(120, 7, 6);
        let r = rfecv(&ModelSpec::default_for(Family::Linear, 0), &x, &y, 5, 1).unwrap();
        assert_eq!(r.score_curve.len(), 10);
        assert!(mask_contains(&r.selected_mask, &[0, 1, 2]));
        assert_eq!(r.selected_mask.iter().filter(|k| **k).count(), r.best_size);
        assert!(r.best().score >= r.full().score);
        assert_eq!(r.elimination_order.len(), 9);
        assert_eq!(
            r,
            rfecv(&ModelSpec::default_for(Family::Linear, 0), &x, &y, 5, 1).unwrap()
        );
    }

    #[test]
    fn indicator_is_inverse_rank() {
        let a = ImportanceReport::from_scores(vec![0, 1, 2, 3, 4], vec![0.5, 0.4, 0.3, 0.2, 0.1]);
        let b = ImportanceReport::from_scores(vec![0, 1, 2, 3, 4], vec![0.1, 0.2, 0.3, 0.4, 0.5]);
        let t = cross_preset_indicator(&[(Preset::Fast, a.clone()), (Preset::Slow, b.clone())]).unwrap();
        assert_eq!(t.values[0], vec![1.0, 0.2]);
        let swapped = cross_preset_indicator(&[(Preset::Slow, b), (Preset::Fast, a)]).unwrap();
        for (r1, r2) in t.values.iter().zip(&swapped.values) {
            assert_eq!(r1[0], r2[1]);
            assert_eq!(r1[1], r2[0]);
        }
        let c = ImportanceReport::from_scores(vec![0, 1], vec![1.0, 0.0]);
        let d = ImportanceReport::from_scores(vec![0, 2], vec![1.0, 0.0]);
        assert!(cross_preset_indicator(&[(Preset::Fast, c), (Preset::Slow, d)]).is_err());
    }

    #[test]
    fn retrain_rows_shape() {
        let ds = crate::dataset::generate_synthetic(&crate::dataset::SyntheticSpec {
            n_chunks: 25,
            noise_level: 0.02,
            seed: 3,
        })
        .unwrap();
        let bundle = crate::regression::train_all_presets(&ds, &[Hyperparams::Linear], 5, 4).unwrap();
        let out = retrain_with_selected(&bundle, &ds, 5, 4).unwrap();
        assert_eq!(out.report.rows.len(), 9);
        for row in &out.report.rows {
            assert_eq!(row.n_total, 19);
            assert!(row.mape_after <= row.mape_before);
            let trained = bundle.entry(row.preset).cv.mean.mape;
            assert_eq!(row.mape_before, trained);
        }
        assert_eq!(out.indicator.values.len(), 19);
        assert_eq!(out.indicator.presets.len(), 9);
    }
}
