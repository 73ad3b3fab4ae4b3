//! Training rows of `(features, preset, measured time)`.
//!
//! Rows come from one of two sources: [`assemble_dataset`] times an external
//! transcoder command on real chunks, and [`generate_synthetic`] draws
//! plausible chunk features and labels them with [`synthetic_time`].

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_features, idx, CategoricalCodebook, FeatureVector, FEATURE_COUNT, FEATURE_NAMES};
use crate::preset::Preset;
use crate::stats::ChunkStats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub chunk_id: String,
    pub preset: Preset,
    /// Seconds, strictly positive.
    pub transcode_time: f64,
    pub features: FeatureVector,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub records: Vec<DatasetRecord>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(records: Vec<DatasetRecord>, provenance: impl Into<String>) -> Self {
        Dataset {
            records,
            provenance: provenance.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn presets(&self) -> BTreeSet<Preset> {
        self.records.iter().map(|r| r.preset).collect()
    }

    /// Feature rows and times for one preset, in record order.
    pub fn xy_for(&self, preset: Preset) -> (Vec<Vec<f64>>, Vec<f64>) {
        self.records
            .iter()
            .filter(|r| r.preset == preset)
            .map(|r| (r.features.0.to_vec(), r.transcode_time))
            .unzip()
    }

    /// Fails with [`Error::MissingPreset`] naming the first absent preset.
    pub fn require_all_presets(&self) -> Result<()> {
        let present = self.presets();
        match Preset::ALL.into_iter().find(|p| !present.contains(p)) {
            Some(p) => Err(Error::MissingPreset(p)),
            None => Ok(()),
        }
    }
}

pub fn dataset_csv_header() -> String {
    format!("chunk_id,preset,transcode_time,{}", FEATURE_NAMES.join(","))
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    write_dataset(dataset, std::io::BufWriter::new(file))
}

pub fn write_dataset(dataset: &Dataset, out: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let header = dataset_csv_header();
    w.write_record(header.split(','))?;
    for r in &dataset.records {
        let mut row = Vec::with_capacity(3 + FEATURE_COUNT);
        row.push(r.chunk_id.clone());
        row.push(r.preset.token().to_string());
        row.push(r.transcode_time.to_string());
        row.extend(r.features.0.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    let mut ds = read_dataset(file).map_err(|e| e.context(path.display().to_string()))?;
    ds.provenance = path.display().to_string();
    Ok(ds)
}

pub fn read_dataset(input: impl Read) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != dataset_csv_header() {
        return Err(Error::Schema(format!(
            "dataset header must be `{}`",
            dataset_csv_header()
        )));
    }
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let field = |k: usize| row.get(k).unwrap_or("");
        let preset: Preset = field(1).parse().map_err(|e: Error| Error::parse(line, e.to_string()))?;
        let time = parse_f64(field(2), line)?;
        if !(time > 0.0) {
            return Err(Error::parse(
                line,
                format!("transcode_time must be positive, got {time}"),
            ));
        }
        let mut features = [0.0; FEATURE_COUNT];
        for (k, slot) in features.iter_mut().enumerate() {
            *slot = parse_f64(field(3 + k), line)?;
        }
        records.push(DatasetRecord {
            chunk_id: field(0).to_string(),
            preset,
            transcode_time: time,
            features: FeatureVector(features),
        });
    }
    Ok(Dataset::new(records, "csv"))
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid number `{s}`")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("non-finite value `{s}`")));
    }
    Ok(v)
}

/// Shuffles with `seed` and takes `round(n * train_fraction)` records for
/// training. Both parts keep the original record order.
pub fn split_dataset(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if dataset.is_empty() {
        return Err(Error::invalid("cannot split an empty dataset"));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = dataset.len();
    let n_train = (n as f64 * train_fraction).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train_idx = order[..n_train].to_vec();
    let mut test_idx = order[n_train..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let pick = |ids: &[usize], tag: &str| {
        Dataset::new(
            ids.iter().map(|&i| dataset.records[i].clone()).collect(),
            format!("{} [{tag} split, seed {seed}]", dataset.provenance),
        )
    };
    Ok((pick(&train_idx, "train"), pick(&test_idx, "test")))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub n_chunks: usize,
    pub noise_level: f64,
    pub seed: u64,
}

/// Per-preset coefficients of the synthetic timing model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticCoefficients {
    /// Fixed per-chunk overhead, seconds.
    pub base: f64,
    /// Seconds per million weighted macroblocks; also scales the bitrate term.
    pub block_rate: f64,
    /// Seconds per million motion vectors.
    pub motion_rate: f64,
    /// Seconds per 100 units of mean motion vector magnitude.
    pub search_rate: f64,
}

impl SyntheticCoefficients {
    /// Every coefficient grows strictly with the preset ordinal `o`:
    /// `base = 0.03 + 0.01 o`, `block_rate = 0.8 * 1.22^o`,
    /// `motion_rate = 0.04 * 1.35^o`, `search_rate = 0.15 * 1.3^o`.
    pub fn of(preset: Preset) -> Self {
        let o = preset.ordinal() as i32;
        SyntheticCoefficients {
            base: 0.03 + 0.01 * f64::from(o),
            block_rate: 0.8 * 1.22f64.powi(o),
            motion_rate: 0.04 * 1.35f64.powi(o),
            search_rate: 0.15 * 1.3f64.powi(o),
        }
    }
}

/// Noise-free synthetic transcoding time in seconds.
///
/// ```text
/// blocks = 0.9 mb_I + 0.6 mb_P + 0.75 mb_B + 0.12 mb_S + 0.1 part_8x8 + 0.25 part_4x4
/// time   = base
///        + block_rate  * blocks * 1e-6
///        + motion_rate * mv_count * 1e-6
///        + search_rate * mv_mean * 1e-2
///        + block_rate  * output_bitrate * 2e-5
/// ```
///
/// The model is linear in the features for a fixed preset and strictly
/// increasing in preset slowness, macroblock totals, motion vector count and
/// mean magnitude. SAR, frame-type counts, the remaining partition sizes and
/// the color codes carry no signal.
pub fn synthetic_time(features: &FeatureVector, preset: Preset) -> f64 {
    let f = &features.0;
    let c = SyntheticCoefficients::of(preset);
    let blocks = 0.9 * f[idx::MB_I]
        + 0.6 * f[idx::MB_P]
        + 0.75 * f[idx::MB_B]
        + 0.12 * f[idx::MB_S]
        + 0.1 * f[idx::PART_8X8]
        + 0.25 * f[idx::PART_4X4];
    c.base
        + c.block_rate * blocks * 1e-6
        + c.motion_rate * f[idx::MV_COUNT] * 1e-6
        + c.search_rate * f[idx::MV_MEAN] * 1e-2
        + c.block_rate * f[idx::OUTPUT_BITRATE] * 2e-5
}

/// Draws one plausible 120-frame chunk's features.
pub fn synthetic_features(rng: &mut impl Rng) -> FeatureVector {
    const FRAMES: f64 = 120.0;
    let mbs_per_frame = [1350.0, 3600.0, 8160.0][rng.gen_range(0..3)];
    let inter_frames = FRAMES - 1.0;
    let pict_b = (inter_frames * rng.gen_range(0.0..0.66f64)).round();
    let pict_p = inter_frames - pict_b;

    let inter_mbs = mbs_per_frame * inter_frames;
    let intra_in_inter = (inter_mbs * rng.gen_range(0.01..0.25f64)).round();
    let mb_i = mbs_per_frame + intra_in_inter;
    let rest = inter_mbs - intra_in_inter;
    let mb_s = (rest * rng.gen_range(0.05..0.6f64)).round();
    let coded = rest - mb_s;
    let mb_b = (coded * pict_b / inter_frames).round();
    let mb_p = coded - mb_b;

    let texture: f64 = rng.gen();
    let weights = [
        1.0 - 0.7 * texture + rng.gen_range(0.0..0.2),
        0.1 + rng.gen_range(0.0..0.1),
        0.1 + rng.gen_range(0.0..0.1),
        0.1 + 0.5 * texture,
        0.05 + 0.4 * texture * rng.gen::<f64>(),
    ];
    let total_w: f64 = weights.iter().sum();
    let nonskip = mb_i + mb_p + mb_b;
    let mut parts = [0.0; 5];
    for (p, w) in parts.iter_mut().zip(weights) {
        *p = (nonskip * w / total_w * rng.gen_range(1.0..1.3)).round();
    }

    let sar = match rng.gen_range(0..10) {
        0 => 4.0 / 3.0,
        1 => 16.0 / 15.0,
        2 => 64.0 / 45.0,
        _ => 1.0,
    };
    let mv_count = ((mb_p + mb_b) * rng.gen_range(0.8..2.5)).round();
    let mv_mean = rng.gen_range(0.5f64.ln()..48f64.ln()).exp();
    let bitrate = if rng.gen_bool(0.5) { 6000.0 } else { 4000.0 };

    let mut v = [0.0; FEATURE_COUNT];
    v[idx::PICT_B] = pict_b;
    v[idx::PICT_P] = pict_p;
    v[idx::MB_I] = mb_i;
    v[idx::MB_P] = mb_p;
    v[idx::MB_B] = mb_b;
    v[idx::MB_S] = mb_s;
    v[idx::PART_16X16..=idx::PART_4X4].copy_from_slice(&parts);
    v[idx::SAR] = sar;
    v[idx::MV_COUNT] = mv_count;
    v[idx::MV_MEAN] = mv_mean;
    v[idx::COLOR_RANGE] = f64::from(rng.gen_range(0..=2u32));
    v[idx::COLOR_SPACE] = f64::from(rng.gen_range(0..=9u32));
    v[idx::COLOR_PRIMARIES] = f64::from(rng.gen_range(0..=10u32));
    v[idx::COLOR_TRANSFER] = f64::from(rng.gen_range(0..=16u32));
    v[idx::OUTPUT_BITRATE] = bitrate;
    FeatureVector(v)
}

/// One record per preset per synthetic chunk. Times are [`synthetic_time`]
/// scaled by `1 + e`, `e` uniform in `[-noise_level, noise_level]`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.n_chunks == 0 {
        return Err(Error::invalid("n_chunks must be positive"));
    }
    if !(spec.noise_level >= 0.0 && spec.noise_level < 1.0) {
        return Err(Error::invalid(format!(
            "noise level must lie in [0, 1), got {}",
            spec.noise_level
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut records = Vec::with_capacity(spec.n_chunks * Preset::COUNT);
    for i in 0..spec.n_chunks {
        let features = synthetic_features(&mut rng);
        for preset in Preset::ALL {
            let eps = if spec.noise_level > 0.0 {
                rng.gen_range(-spec.noise_level..=spec.noise_level)
            } else {
                0.0
            };
            records.push(DatasetRecord {
                chunk_id: format!("syn{i:05}"),
                preset,
                transcode_time: synthetic_time(&features, preset) * (1.0 + eps),
                features,
            });
        }
    }
    Ok(Dataset::new(
        records,
        format!(
            "synthetic(n_chunks={}, noise={}, seed={})",
            spec.n_chunks, spec.noise_level, spec.seed
        ),
    ))
}

pub const PLACEHOLDERS: [&str; 4] = ["{input}", "{preset}", "{bitrate}", "{output}"];

/// A transcoder command line with `{input} {preset} {bitrate} {output}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandTemplate {
    args: Vec<String>,
}

impl CommandTemplate {
    pub fn parse(template: &str) -> Result<Self> {
        for p in PLACEHOLDERS {
            if !template.contains(p) {
                return Err(Error::invalid(format!("command template lacks {p}")));
            }
        }
        let args = shell_words::split(template).map_err(|e| Error::invalid(format!("command template: {e}")))?;
        if args.is_empty() {
            return Err(Error::invalid("empty command template"));
        }
        Ok(CommandTemplate { args })
    }

    pub fn render(&self, input: &Path, preset: Preset, bitrate: f64, output: &Path) -> Vec<String> {
        let input = input.to_string_lossy();
        let output = output.to_string_lossy();
        let bitrate = format!("{bitrate}");
        self.args
            .iter()
            .map(|a| {
                a.replace("{input}", &input)
                    .replace("{preset}", preset.token())
                    .replace("{bitrate}", &bitrate)
                    .replace("{output}", &output)
            })
            .collect()
    }
}

/// Runs the rendered command once and returns its wall-clock duration.
pub fn measure_transcode(
    template: &CommandTemplate,
    input: &Path,
    preset: Preset,
    output_bitrate: f64,
    output: &Path,
) -> Result<Duration> {
    let argv = template.render(input, preset, output_bitrate, output);
    let start = Instant::now();
    let result = Command::new(&argv[0])
        .args(&argv[1..])
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .output()?;
    let elapsed = start.elapsed();
    if !result.status.success() {
        let mut status = result.status.to_string();
        let stderr = String::from_utf8_lossy(&result.stderr);
        if let Some(last) = stderr.lines().last() {
            let _ = write!(status, "; {last}");
        }
        return Err(Error::CommandFailed {
            command: argv.join(" "),
            status,
        });
    }
    Ok(elapsed)
}

/// Median of `repeat` runs of [`measure_transcode`].
pub fn measure_transcode_median(
    template: &CommandTemplate,
    input: &Path,
    preset: Preset,
    output_bitrate: f64,
    output: &Path,
    repeat: usize,
) -> Result<Duration> {
    let mut runs = (0..repeat.max(1))
        .map(|_| measure_transcode(template, input, preset, output_bitrate, output))
        .collect::<Result<Vec<_>>>()?;
    runs.sort_unstable();
    let n = runs.len();
    Ok(if n % 2 == 1 {
        runs[n / 2]
    } else {
        (runs[n / 2 - 1] + runs[n / 2]) / 2
    })
}

#[derive(Debug, Clone)]
pub struct ChunkInput {
    pub stats: ChunkStats,
    pub media: PathBuf,
}

#[derive(Debug, Clone)]
pub struct AssembleOptions {
    pub repeat: usize,
    pub output_dir: PathBuf,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        AssembleOptions {
            repeat: 1,
            output_dir: std::env::temp_dir(),
        }
    }
}

/// Times every (chunk, bitrate, preset) cell serially; concurrent runs would
/// skew each other's wall-clock measurements.
pub fn assemble_dataset(
    chunks: &[ChunkInput],
    bitrates: &[f64],
    template: &CommandTemplate,
    codebook: &CategoricalCodebook,
    opts: &AssembleOptions,
) -> Result<Dataset> {
    if chunks.is_empty() {
        return Err(Error::invalid("no chunks given"));
    }
    if bitrates.is_empty() {
        return Err(Error::invalid("no target bitrates given"));
    }
    let mut records = Vec::with_capacity(chunks.len() * bitrates.len() * Preset::COUNT);
    for chunk in chunks {
        let id = &chunk.stats.chunk_id;
        for &bitrate in bitrates {
            let features =
                extract_features(&chunk.stats, bitrate, codebook).map_err(|e| e.context(format!("chunk {id}")))?;
            for preset in Preset::ALL {
                let output = opts.output_dir.join(format!("{id}_{preset}_{bitrate}.mp4"));
                let elapsed = measure_transcode_median(template, &chunk.media, preset, bitrate, &output, opts.repeat)
                    .map_err(|e| e.context(format!("chunk {id}, preset {preset}, bitrate {bitrate}")))?;
                records.push(DatasetRecord {
                    chunk_id: id.clone(),
                    preset,
                    transcode_time: elapsed.as_secs_f64().max(1e-9),
                    features,
                });
            }
        }
    }
    Ok(Dataset::new(records, format!("measured({} chunks)", chunks.len())))
}
