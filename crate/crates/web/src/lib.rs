//! Browser bindings for the demo page in `www/`.
//!
//! Every export returns a JSON string so the page needs no generated
//! TypeScript types. Nothing here reads a clock: prediction goes through the
//! pure path, which is safe on `wasm32-unknown-unknown`.

use serde_json::json;
use wasm_bindgen::prelude::*;

use presetpick::dataset::{generate_synthetic, SyntheticSpec};
use presetpick::features::{extract_features, feature_names, mv_chunk_sum, mv_mean, CategoricalCodebook};
use presetpick::reference::sample_ground_truth;
use presetpick::regression::{train_all_presets, Family, Hyperparams, PresetModelBundle};
use presetpick::selector::{compute_budget, predict_times, select_preset_with_margin};
use presetpick::simulate::simulate_oracle;
use presetpick::stats::parse_chunk_stats_str;
use presetpick::Result;

fn to_js(r: Result<serde_json::Value>) -> std::result::Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

/// Oracle replay of the sample clip under the given budget.
#[wasm_bindgen]
pub fn simulate_sample_clip(chunk_duration: f64, overhead: f64, margin: f64) -> std::result::Result<String, JsError> {
    to_js(sample_clip_report(chunk_duration, overhead, margin))
}

pub fn sample_clip_report(chunk_duration: f64, overhead: f64, margin: f64) -> Result<serde_json::Value> {
    let budget = compute_budget(chunk_duration, overhead)?;
    let report = simulate_oracle(&sample_ground_truth(), &budget, margin)?;
    Ok(serde_json::to_value(report)?)
}

/// Feature vector and motion-vector summary of a statistics text.
#[wasm_bindgen]
pub fn extract_stats(text: &str, bitrate: f64) -> std::result::Result<String, JsError> {
    to_js(stats_summary(text, bitrate))
}

pub fn stats_summary(text: &str, bitrate: f64) -> Result<serde_json::Value> {
    let chunk = parse_chunk_stats_str(text, "pasted")?;
    let fv = extract_features(&chunk, bitrate, &CategoricalCodebook::default())?;
    Ok(json!({
        "frames": chunk.frames.len(),
        "mv_sum": mv_chunk_sum(&chunk),
        "mv_mean": mv_mean(&chunk),
        "names": feature_names().to_vec(),
        "values": fv.as_slice(),
    }))
}

/// Linear models trained in the page on synthetic data.
#[wasm_bindgen]
pub struct SyntheticPredictor {
    bundle: PresetModelBundle,
}

#[wasm_bindgen]
impl SyntheticPredictor {
    #[wasm_bindgen(constructor)]
    pub fn new(n_chunks: usize, noise: f64, seed: u64) -> std::result::Result<SyntheticPredictor, JsError> {
        SyntheticPredictor::train(n_chunks, noise, seed).map_err(|e| JsError::new(&e.to_string()))
    }

    /// Predicts every preset for a statistics text and picks one.
    pub fn select(
        &self,
        text: &str,
        bitrate: f64,
        chunk_duration: f64,
        overhead: f64,
        margin: f64,
    ) -> std::result::Result<String, JsError> {
        to_js(self.decide(text, bitrate, chunk_duration, overhead, margin))
    }

    /// Mean cross-validated MAPE of each preset's chosen model.
    pub fn summary(&self) -> String {
        let rows: Vec<_> = self
            .bundle
            .presets
            .iter()
            .map(|(p, e)| json!({ "preset": p.token(), "family": e.family().name(), "mape": e.cv.mean.mape }))
            .collect();
        serde_json::Value::from(rows).to_string()
    }
}

impl SyntheticPredictor {
    pub fn train(n_chunks: usize, noise: f64, seed: u64) -> Result<Self> {
        let data = generate_synthetic(&SyntheticSpec {
            n_chunks,
            noise_level: noise,
            seed,
        })?;
        let zoo: Vec<Hyperparams> = [Family::Linear, Family::Ridge, Family::Huber]
            .into_iter()
            .map(Hyperparams::default_for)
            .collect();
        Ok(SyntheticPredictor {
            bundle: train_all_presets(&data, &zoo, 5, seed)?,
        })
    }

    pub fn decide(
        &self,
        text: &str,
        bitrate: f64,
        chunk_duration: f64,
        overhead: f64,
        margin: f64,
    ) -> Result<serde_json::Value> {
        let chunk = parse_chunk_stats_str(text, "pasted")?;
        let fv = extract_features(&chunk, bitrate, &CategoricalCodebook::default())?;
        let times = predict_times(&self.bundle, &fv)?;
        let decision = select_preset_with_margin(&times, &compute_budget(chunk_duration, overhead)?, margin)?;
        Ok(serde_json::to_value(decision)?)
    }
}
