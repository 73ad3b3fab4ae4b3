use log::warn;
use serde::{Deserialize, Serialize};

use super::bundle::{BUNDLE_FORMAT, BUNDLE_SCHEMA_VERSION};
use super::{
    compute_metrics, fit_masked, kfold_cv_masked, CvReport, Family, Hyperparams, Metrics, ModelSpec, TrainedModel,
};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_NAMES};
use crate::par;
use crate::preset::{Preset, PresetMap};

/// Mixes a master seed with a task ordinal (splitmix64 finalizer), so every
/// per-preset task gets its own stream independent of scheduling order.
pub fn derive_seed(master: u64, ordinal: u64) -> u64 {
    let mut z = master ^ ordinal.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub spec: ModelSpec,
    /// `Err` carries the fit failure message for a skipped spec.
    pub outcome: std::result::Result<CvReport, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub spec: ModelSpec,
    pub model: TrainedModel,
    pub cv: CvReport,
    pub candidates: Vec<Candidate>,
}

pub fn select_best_model(specs: &[ModelSpec], x: &[Vec<f64>], y: &[f64], k: usize, seed: u64) -> Result<Selection> {
    let width = x.first().map_or(0, Vec::len);
    select_best_model_masked(specs, x, y, &vec![true; width], k, seed)
}

/// Cross-validates every spec on the masked columns and refits the one with
/// the lowest mean MAPE on all rows. Equal scores go to the family listed
/// first in [`Family::ALL`], then to the earlier spec.
pub fn select_best_model_masked(
    specs: &[ModelSpec],
    x: &[Vec<f64>],
    y: &[f64],
    mask: &[bool],
    k: usize,
    seed: u64,
) -> Result<Selection> {
    if specs.is_empty() {
        return Err(Error::invalid("no model specs to select from"));
    }
    let candidates: Vec<Candidate> = par::map(specs.to_vec(), |spec| Candidate {
        spec,
        outcome: kfold_cv_masked(&spec, x, y, mask, k, seed).map_err(|e| e.to_string()),
    });
    let mut best: Option<(usize, &CvReport)> = None;
    for (i, c) in candidates.iter().enumerate() {
        match &c.outcome {
            Err(msg) => warn!("skipping {}: {msg}", c.spec.family()),
            Ok(cv) => {
                let better = match best {
                    None => true,
                    Some((j, b)) => {
                        cv.mean.mape < b.mean.mape
                            || (cv.mean.mape == b.mean.mape && c.spec.family() < candidates[j].spec.family())
                    }
                };
                if better {
                    best = Some((i, cv));
                }
            }
        }
    }
    let Some((i, cv)) = best else {
        let reasons: Vec<String> = candidates
            .iter()
            .filter_map(|c| c.outcome.as_ref().err().map(|m| format!("{}: {m}", c.spec.family())))
            .collect();
        return Err(Error::invalid(format!(
            "every model spec failed ({})",
            reasons.join("; ")
        )));
    };
    let spec = candidates[i].spec;
    let cv = cv.clone();
    let model = fit_masked(&spec, x, y, mask)?;
    Ok(Selection {
        spec,
        model,
        cv,
        candidates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleEntry {
    pub preset: Preset,
    pub model: TrainedModel,
    /// Cross-validated metrics of the winning spec on its feature mask.
    pub cv: CvReport,
}

impl BundleEntry {
    pub fn family(&self) -> Family {
        self.model.family()
    }

    pub fn feature_mask(&self) -> &[bool] {
        &self.model.feature_mask
    }
}

/// One trained model per preset, plus enough metadata to verify the feature
/// layout when the bundle is read back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetModelBundle {
    pub format: String,
    pub schema_version: u32,
    pub feature_names: Vec<String>,
    pub presets: PresetMap<BundleEntry>,
}

impl PresetModelBundle {
    pub fn new(presets: PresetMap<BundleEntry>) -> Self {
        PresetModelBundle {
            format: BUNDLE_FORMAT.to_string(),
            schema_version: BUNDLE_SCHEMA_VERSION,
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            presets,
        }
    }

    pub fn entry(&self, preset: Preset) -> &BundleEntry {
        &self.presets[preset]
    }

    pub fn predict(&self, preset: Preset, features: &FeatureVector) -> Result<f64> {
        self.presets[preset].model.predict(features.as_slice())
    }

    /// The report of cross-validated metrics per preset.
    pub fn cv_report(&self) -> TrainingReport {
        TrainingReport::new(
            "cv",
            self.presets
                .iter()
                .map(|(p, e)| TrainingRow {
                    preset: p,
                    family: e.family(),
                    metrics: e.cv.mean,
                })
                .collect(),
        )
    }
}

/// Runs model selection independently for each preset. Every spec is run
/// with the per-preset seed `derive_seed(seed, ordinal)`, which also drives
/// the fold assignment.
pub fn train_all_presets(dataset: &Dataset, params: &[Hyperparams], k: usize, seed: u64) -> Result<PresetModelBundle> {
    dataset.require_all_presets()?;
    let results = par::map(Preset::ALL.to_vec(), |preset| {
        let s = derive_seed(seed, preset.ordinal() as u64);
        let specs: Vec<ModelSpec> = params.iter().map(|p| ModelSpec::new(*p, s)).collect();
        let (x, y) = dataset.xy_for(preset);
        let sel = select_best_model(&specs, &x, &y, k, s).map_err(|e| e.context(format!("preset {preset}")))?;
        Ok((
            preset,
            BundleEntry {
                preset,
                model: sel.model,
                cv: sel.cv,
            },
        ))
    });
    let entries = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(PresetModelBundle::new(PresetMap::try_from_pairs(entries)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRow {
    pub preset: Preset,
    pub family: Family,
    pub metrics: Metrics,
}

/// Per-preset metrics plus the column-wise mean over presets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    /// Where the metrics come from: `cv` or `held-out`.
    pub source: String,
    pub rows: Vec<TrainingRow>,
    pub mean: Metrics,
}

impl TrainingReport {
    pub fn new(source: &str, rows: Vec<TrainingRow>) -> Self {
        let all: Vec<Metrics> = rows.iter().map(|r| r.metrics).collect();
        TrainingReport {
            source: source.to_string(),
            mean: Metrics::mean_of(&all),
            rows,
        }
    }
}

/// Metrics of each preset's model on a held-out dataset.
pub fn evaluate_bundle(bundle: &PresetModelBundle, test: &Dataset) -> Result<TrainingReport> {
    test.require_all_presets()?;
    let mut rows = Vec::with_capacity(Preset::COUNT);
    for (preset, entry) in bundle.presets.iter() {
        let (x, y) = test.xy_for(preset);
        let pred = entry.model.predict_many(&x)?;
        rows.push(TrainingRow {
            preset,
            family: entry.family(),
            metrics: compute_metrics(&y, &pred)?,
        });
    }
    Ok(TrainingReport::new("held-out", rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SyntheticSpec};
    use crate::regression::tests::{linear_data, noisy_data};

    #[test]
    fn single_spec_wins() {
        let (x, y) = noisy_data(40, 1);
        let sel = select_best_model(&[ModelSpec::default_for(Family::Knn, 0)], &x, &y, 5, 1).unwrap();
        assert_eq!(sel.spec.family(), Family::Knn);
    }

    #[test]
    fn linear_beats_knn_on_linear_data() {
        let (x, y) = linear_data(60, 2);
        let specs = [
            ModelSpec::default_for(Family::Knn, 0),
            ModelSpec::default_for(Family::Linear, 0),
        ];
        let sel = select_best_model(&specs, &x, &y, 5, 3).unwrap();
        assert_eq!(sel.spec.family(), Family::Linear);
    }

    #[test]
    fn tie_goes_to_canonical_order() {
        let (x, _) = linear_data(30, 3);
        let y = vec![2.0; 30];
        // every family scores exactly 0 on a constant target
        let specs = [
            ModelSpec::default_for(Family::DecisionTree, 0),
            ModelSpec::default_for(Family::Knn, 0),
            ModelSpec::default_for(Family::Ridge, 0),
        ];
        let sel = select_best_model(&specs, &x, &y, 5, 3).unwrap();
        assert_eq!(sel.spec.family(), Family::Ridge);
    }

    #[test]
    fn failing_spec_is_skipped() {
        let (x, y) = noisy_data(30, 4);
        let bad = ModelSpec::new(Hyperparams::Ridge { alpha: -1.0 }, 0);
        let sel = select_best_model(&[bad, ModelSpec::default_for(Family::Linear, 0)], &x, &y, 5, 0).unwrap();
        assert_eq!(sel.spec.family(), Family::Linear);
        assert!(sel.candidates[0].outcome.is_err());
        assert!(select_best_model(&[bad], &x, &y, 5, 0).is_err());
    }

    #[test]
    fn derive_seed_spreads() {
        let seeds: std::collections::BTreeSet<u64> = (0..9).map(|i| derive_seed(7, i)).collect();
        assert_eq!(seeds.len(), 9);
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }

    #[test]
    fn trains_nine_and_reports_missing() {
        let ds = generate_synthetic(&SyntheticSpec {
            n_chunks: 30,
            noise_level: 0.02,
            seed: 5,
        })
        .unwrap();
        let params = [Hyperparams::Linear, Hyperparams::Knn { k: 5 }];
        let bundle = train_all_presets(&ds, &params, 5, 11).unwrap();
        assert_eq!(bundle.presets.iter().count(), 9);
        let report = bundle.cv_report();
        let mean_mape = report.rows.iter().map(|r| r.metrics.mape).sum::<f64>() / 9.0;
        assert!((report.mean.mape - mean_mape).abs() < 1e-12);

        let mut partial = ds.clone();
        partial.records.retain(|r| r.preset != Preset::Medium);
        let err = train_all_presets(&partial, &params, 5, 11).unwrap_err();
        assert!(err.to_string().contains("medium"), "{err}");
    }
}
