//! Replays a selection policy over measured per-chunk results.
//!
//! In oracle mode the policy sees the measured times themselves, which
//! isolates the selection rule from predictor error. In predicted mode it
//! sees model output and the replay counts how often the chosen preset's
//! measured time overran the budget.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_COUNT, FEATURE_NAMES};
use crate::preset::{Preset, PresetMap};
use crate::regression::PresetModelBundle;
use crate::selector::{aggregate_chunk_results, predict_times, select_preset_with_margin, slowest_within, BudgetSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRow {
    pub chunk_id: String,
    pub preset: Preset,
    /// Seconds.
    pub transcode_time: f64,
    /// dB.
    pub psnr: f64,
}

/// Measured `(time, psnr)` per `(chunk, preset)` cell. Chunks keep the order
/// in which they first appear.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthTable {
    rows: Vec<GroundTruthRow>,
    index: BTreeMap<(String, Preset), usize>,
    chunks: Vec<String>,
}

impl GroundTruthTable {
    pub fn new(rows: Vec<GroundTruthRow>) -> Result<Self> {
        let mut index = BTreeMap::new();
        let mut chunks = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            if !(r.transcode_time > 0.0 && r.transcode_time.is_finite()) {
                return Err(Error::invalid(format!(
                    "({}, {}) time must be positive",
                    r.chunk_id, r.preset
                )));
            }
            if !(r.psnr > 0.0 && r.psnr.is_finite()) {
                return Err(Error::invalid(format!(
                    "({}, {}) PSNR must be positive",
                    r.chunk_id, r.preset
                )));
            }
            if index.insert((r.chunk_id.clone(), r.preset), i).is_some() {
                return Err(Error::invalid(format!("duplicate cell ({}, {})", r.chunk_id, r.preset)));
            }
            if !chunks.contains(&r.chunk_id) {
                chunks.push(r.chunk_id.clone());
            }
        }
        Ok(GroundTruthTable { rows, index, chunks })
    }

    pub fn rows(&self) -> &[GroundTruthRow] {
        &self.rows
    }

    pub fn chunks(&self) -> &[String] {
        &self.chunks
    }

    pub fn get(&self, chunk_id: &str, preset: Preset) -> Option<&GroundTruthRow> {
        self.index.get(&(chunk_id.to_string(), preset)).map(|&i| &self.rows[i])
    }

    fn cell(&self, chunk_id: &str, preset: Preset) -> Result<&GroundTruthRow> {
        self.get(chunk_id, preset).ok_or_else(|| Error::MissingCell {
            chunk_id: chunk_id.to_string(),
            preset,
        })
    }

    /// Presets measured for one chunk, with their times.
    pub fn measured_times(&self, chunk_id: &str) -> Vec<(Preset, f64)> {
        Preset::ALL
            .into_iter()
            .filter_map(|p| self.get(chunk_id, p).map(|r| (p, r.transcode_time)))
            .collect()
    }
}

pub const GROUND_TRUTH_HEADER: [&str; 4] = ["chunk_id", "preset", "transcode_time", "psnr"];

pub fn read_ground_truth(input: impl Read) -> Result<GroundTruthTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != GROUND_TRUTH_HEADER {
        return Err(Error::Schema(format!(
            "ground-truth header is `{}`, expected `{}`",
            header.join(","),
            GROUND_TRUTH_HEADER.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        let num = |j: usize, what: &str| -> Result<f64> {
            rec[j]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(line, format!("bad {what} `{}`", &rec[j])))
        };
        let preset = rec[1]
            .trim()
            .parse::<Preset>()
            .map_err(|e| Error::parse(line, e.to_string()))?;
        rows.push(GroundTruthRow {
            chunk_id: rec[0].to_string(),
            preset,
            transcode_time: num(2, "transcode_time")?,
            psnr: num(3, "psnr")?,
        });
    }
    GroundTruthTable::new(rows)
}

pub fn load_ground_truth(path: &Path) -> Result<GroundTruthTable> {
    let file = std::fs::File::open(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    read_ground_truth(file).map_err(|e| e.context(path.display().to_string()))
}

pub fn write_ground_truth(table: &GroundTruthTable, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GROUND_TRUTH_HEADER)?;
    for r in &table.rows {
        w.write_record([
            r.chunk_id.as_str(),
            r.preset.token(),
            &r.transcode_time.to_string(),
            &r.psnr.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-chunk features: header `chunk_id,<feature names>`.
pub fn read_chunk_features(input: impl Read) -> Result<Vec<(String, FeatureVector)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let expected: Vec<&str> = std::iter::once("chunk_id").chain(FEATURE_NAMES).collect();
    if header != expected {
        return Err(Error::Schema(format!(
            "features header must be `{}`",
            expected.join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let values = (1..=FEATURE_COUNT)
            .map(|j| rec[j].trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::parse(i + 2, e.to_string()))?;
        out.push((rec[0].to_string(), FeatureVector::from_slice(&values)?));
    }
    Ok(out)
}

pub fn chunk_features_csv_header() -> String {
    format!("chunk_id,{}", FEATURE_NAMES.join(","))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimulationMode {
    Oracle,
    Predicted,
}

impl fmt::Display for SimulationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SimulationMode::Oracle => "oracle",
            SimulationMode::Predicted => "predicted",
        })
    }
}

impl FromStr for SimulationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(SimulationMode::Oracle),
            "predicted" => Ok(SimulationMode::Predicted),
            _ => Err(Error::invalid(format!(
                "unknown simulation mode `{s}` (oracle or predicted)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRow {
    pub chunk_id: String,
    pub chosen: Preset,
    pub feasible: bool,
    pub time: f64,
    pub psnr: f64,
    pub baseline_time: f64,
    pub baseline_psnr: f64,
    /// Measured time of the chosen preset exceeded the budget.
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub mode: SimulationMode,
    pub budget: f64,
    pub margin: f64,
    pub rows: Vec<SimulationRow>,
    pub policy_total_time: f64,
    pub policy_mean_psnr: f64,
    pub baseline_total_time: f64,
    pub baseline_mean_psnr: f64,
    /// Policy minus baseline mean PSNR, dB.
    pub gain: f64,
    pub violations: usize,
}

fn finish(
    mode: SimulationMode,
    budget: &BudgetSpec,
    margin: f64,
    rows: Vec<SimulationRow>,
) -> Result<SimulationReport> {
    let col = |f: fn(&SimulationRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let (policy_total_time, policy_mean_psnr) = aggregate_chunk_results(&col(|r| r.time), &col(|r| r.psnr))?;
    let (baseline_total_time, baseline_mean_psnr) =
        aggregate_chunk_results(&col(|r| r.baseline_time), &col(|r| r.baseline_psnr))?;
    Ok(SimulationReport {
        mode,
        budget: budget.budget,
        margin,
        violations: rows.iter().filter(|r| r.violation).count(),
        rows,
        policy_total_time,
        policy_mean_psnr,
        baseline_total_time,
        baseline_mean_psnr,
        gain: policy_mean_psnr - baseline_mean_psnr,
    })
}

fn row_for(
    table: &GroundTruthTable,
    chunk: &str,
    chosen: Preset,
    feasible: bool,
    budget: f64,
) -> Result<SimulationRow> {
    let cell = table.cell(chunk, chosen)?;
    let base = table.cell(chunk, Preset::Ultrafast)?;
    Ok(SimulationRow {
        chunk_id: chunk.to_string(),
        chosen,
        feasible,
        time: cell.transcode_time,
        psnr: cell.psnr,
        baseline_time: base.transcode_time,
        baseline_psnr: base.psnr,
        violation: cell.transcode_time > budget,
    })
}

/// Chooses, per chunk, the slowest measured preset whose measured time
/// (times `margin`) fits the budget.
pub fn simulate_oracle(table: &GroundTruthTable, budget: &BudgetSpec, margin: f64) -> Result<SimulationReport> {
    let mut rows = Vec::with_capacity(table.chunks().len());
    for chunk in table.chunks() {
        let pick = slowest_within(table.measured_times(chunk), budget.budget, margin);
        rows.push(row_for(
            table,
            chunk,
            pick.unwrap_or(Preset::Ultrafast),
            pick.is_some(),
            budget.budget,
        )?);
    }
    finish(SimulationMode::Oracle, budget, margin, rows)
}

/// Chooses from per-chunk predicted times. Chunks without predictions are
/// an error; table chunks missing from `predictions` are skipped.
pub fn simulate_predicted(
    table: &GroundTruthTable,
    predictions: &[(String, PresetMap<f64>)],
    budget: &BudgetSpec,
    margin: f64,
) -> Result<SimulationReport> {
    let mut rows = Vec::with_capacity(predictions.len());
    for (chunk, times) in predictions {
        let d = select_preset_with_margin(times, budget, margin)?;
        rows.push(row_for(table, chunk, d.chosen, d.feasible, budget.budget)?);
    }
    finish(SimulationMode::Predicted, budget, margin, rows)
}

/// Predicted mode driven by a bundle and per-chunk feature vectors.
pub fn simulate_with_bundle(
    table: &GroundTruthTable,
    bundle: &PresetModelBundle,
    features: &[(String, FeatureVector)],
    budget: &BudgetSpec,
    margin: f64,
) -> Result<SimulationReport> {
    let predictions = features
        .iter()
        .map(|(id, fv)| Ok((id.clone(), predict_times(bundle, fv)?)))
        .collect::<Result<Vec<_>>>()?;
    simulate_predicted(table, &predictions, budget, margin)
}
