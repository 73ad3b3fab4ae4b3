//! Live-budget preset selection.
//!
//! For each incoming chunk every preset's model predicts a transcoding
//! time; the slowest preset whose (margin-inflated) prediction fits in the
//! budget wins. When nothing fits, the decision falls back to ultrafast and
//! is flagged infeasible instead of failing.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::preset::{Preset, PresetMap};
use crate::regression::PresetModelBundle;

pub const DEFAULT_CHUNK_DURATION: f64 = 4.0;
pub const DEFAULT_PREDICTION_OVERHEAD: f64 = 0.021;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetSpec {
    pub chunk_duration: f64,
    pub prediction_overhead: f64,
    /// Seconds available for transcoding: duration minus overhead.
    pub budget: f64,
}

impl Default for BudgetSpec {
    fn default() -> Self {
        compute_budget(DEFAULT_CHUNK_DURATION, DEFAULT_PREDICTION_OVERHEAD).expect("defaults are valid")
    }
}

pub fn compute_budget(chunk_duration: f64, prediction_overhead: f64) -> Result<BudgetSpec> {
    if !(prediction_overhead >= 0.0) || !prediction_overhead.is_finite() {
        return Err(Error::invalid(format!(
            "prediction overhead must be >= 0, got {prediction_overhead}"
        )));
    }
    let budget = chunk_duration - prediction_overhead;
    if !(budget > 0.0) || !budget.is_finite() {
        return Err(Error::invalid(format!(
            "budget {chunk_duration} - {prediction_overhead} is not positive"
        )));
    }
    Ok(BudgetSpec {
        chunk_duration,
        prediction_overhead,
        budget,
    })
}

/// Wall-clock cost of producing one decision, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Latency {
    pub feature_extract: f64,
    /// Slowest single model; the models are assumed to run side by side.
    pub predictor_max: f64,
    pub total: f64,
}

impl Latency {
    pub fn new(feature_extract: Duration, per_model: &[Duration]) -> Self {
        let fe = feature_extract.as_secs_f64();
        let max = per_model.iter().map(Duration::as_secs_f64).fold(0.0, f64::max);
        Latency {
            feature_extract: fe,
            predictor_max: max,
            total: fe + max,
        }
    }
}

/// Predicted seconds for every preset.
pub fn predict_times(bundle: &PresetModelBundle, features: &FeatureVector) -> Result<PresetMap<f64>> {
    let mut out = PresetMap([0.0; Preset::COUNT]);
    for (preset, entry) in bundle.presets.iter() {
        out[preset] = checked(preset, entry.model.predict(features.as_slice())?)?;
    }
    Ok(out)
}

fn checked(preset: Preset, t: f64) -> Result<f64> {
    if t.is_finite() {
        Ok(t)
    } else {
        Err(Error::invalid(format!("{preset} prediction is not finite ({t})")))
    }
}

/// [`predict_times`] with each model timed separately.
pub fn predict_all_presets(
    bundle: &PresetModelBundle,
    features: &FeatureVector,
    feature_extract: Duration,
) -> Result<(PresetMap<f64>, Latency)> {
    let mut times = PresetMap([0.0; Preset::COUNT]);
    let mut per_model = [Duration::ZERO; Preset::COUNT];
    for (preset, entry) in bundle.presets.iter() {
        let start = Instant::now();
        let t = entry.model.predict(features.as_slice())?;
        per_model[preset.ordinal()] = start.elapsed();
        times[preset] = checked(preset, t)?;
    }
    Ok((times, Latency::new(feature_extract, &per_model)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionDecision {
    pub chosen: Preset,
    /// Raw model output, before the margin is applied.
    pub predicted_times: PresetMap<f64>,
    pub budget: f64,
    pub margin: f64,
    /// False when even ultrafast is predicted over budget.
    pub feasible: bool,
    pub latency: Option<Latency>,
}

/// Slowest preset among `candidates` with `time * margin <= budget`.
pub fn slowest_within(candidates: impl IntoIterator<Item = (Preset, f64)>, budget: f64, margin: f64) -> Option<Preset> {
    candidates
        .into_iter()
        .filter(|(_, t)| t * margin <= budget)
        .map(|(p, _)| p)
        .max()
}

pub fn select_preset(predicted: &PresetMap<f64>, budget: &BudgetSpec) -> Result<SelectionDecision> {
    select_preset_with_margin(predicted, budget, 1.0)
}

/// Predictions are multiplied by `margin` before the budget comparison.
pub fn select_preset_with_margin(
    predicted: &PresetMap<f64>,
    budget: &BudgetSpec,
    margin: f64,
) -> Result<SelectionDecision> {
    if !(margin > 0.0) || !margin.is_finite() {
        return Err(Error::invalid(format!("margin must be positive, got {margin}")));
    }
    for (p, t) in predicted.iter() {
        checked(p, *t)?;
    }
    let mut chosen = None;
    for p in Preset::slowest_first() {
        if predicted[p] * margin <= budget.budget {
            chosen = Some(p);
            break;
        }
    }
    Ok(SelectionDecision {
        chosen: chosen.unwrap_or(Preset::Ultrafast),
        predicted_times: *predicted,
        budget: budget.budget,
        margin,
        feasible: chosen.is_some(),
        latency: None,
    })
}

/// Total time and mean PSNR over a run of chunks.
pub fn aggregate_chunk_results(times: &[f64], psnrs: &[f64]) -> Result<(f64, f64)> {
    if times.len() != psnrs.len() {
        return Err(Error::invalid(format!(
            "{} times but {} PSNR values",
            times.len(),
            psnrs.len()
        )));
    }
    if times.is_empty() {
        return Err(Error::invalid("no chunks to aggregate"));
    }
    let total = times.iter().sum();
    let mean = psnrs.iter().sum::<f64>() / psnrs.len() as f64;
    Ok((total, mean))
}

pub fn decision_csv_header() -> String {
    let mut h = String::from("chunk_id,chosen,feasible,budget");
    for p in Preset::ALL {
        write!(h, ",{p}").unwrap();
    }
    h.push_str(",latency_total");
    h
}

/// One CSV row; `latency_total` is seconds, empty when not measured.
pub fn decision_csv_row(chunk_id: &str, d: &SelectionDecision) -> String {
    let mut row = format!("{chunk_id},{},{},{}", d.chosen, d.feasible, d.budget);
    for t in d.predicted_times.values() {
        write!(row, ",{t}").unwrap();
    }
    row.push(',');
    if let Some(l) = d.latency {
        write!(row, "{}", l.total).unwrap();
    }
    row
}
