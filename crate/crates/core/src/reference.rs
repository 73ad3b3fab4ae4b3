//! Measured reference data for a four-chunk sample clip (120 frames per
//! chunk, transcoded from 8000 to 6000 kbps) under five presets.
//!
//! The published per-preset totals and means are kept alongside so tests can
//! check the aggregation against them.

use crate::preset::Preset;
use crate::simulate::{GroundTruthRow, GroundTruthTable};

pub const SAMPLE_CHUNKS: [&str; 4] = ["V1", "V2", "V3", "V4"];

pub const SAMPLE_PRESETS: [Preset; 5] = [
    Preset::Veryslow,
    Preset::Slow,
    Preset::Fast,
    Preset::Veryfast,
    Preset::Ultrafast,
];

/// Seconds, indexed `[preset][chunk]` in [`SAMPLE_PRESETS`] order.
pub const SAMPLE_TIMES: [[f64; 4]; 5] = [
    [3.56, 3.41, 3.70, 3.54],
    [1.39, 1.37, 1.39, 1.37],
    [0.95, 0.91, 0.95, 0.92],
    [0.77, 0.77, 0.77, 0.77],
    [0.59, 0.59, 0.59, 0.58],
];

/// PSNR in dB, same layout as [`SAMPLE_TIMES`].
pub const SAMPLE_PSNR: [[f64; 4]; 5] = [
    [43.92, 46.0, 44.27, 45.39],
    [43.78, 45.87, 44.08, 45.36],
    [43.54, 45.67, 43.90, 45.11],
    [42.86, 44.95, 43.09, 44.22],
    [33.49, 36.67, 35.20, 35.63],
];

/// Published whole-clip values `(total seconds, mean dB)`, rounded to two
/// decimals.
pub const SAMPLE_TOTALS: [(f64, f64); 5] = [
    (14.21, 44.89),
    (5.52, 44.77),
    (3.73, 44.55),
    (3.08, 43.78),
    (2.35, 35.25),
];

/// The sample clip as a ground-truth table, chunk-major.
pub fn sample_ground_truth() -> GroundTruthTable {
    let mut rows = Vec::with_capacity(20);
    for (c, chunk) in SAMPLE_CHUNKS.iter().enumerate() {
        for (p, preset) in SAMPLE_PRESETS.iter().enumerate() {
            rows.push(GroundTruthRow {
                chunk_id: chunk.to_string(),
                preset: *preset,
                transcode_time: SAMPLE_TIMES[p][c],
                psnr: SAMPLE_PSNR[p][c],
            });
        }
    }
    GroundTruthTable::new(rows).expect("reference rows are unique and positive")
}
