//! The 19-element feature vector fed to every per-preset regressor.
//!
//! Eighteen features describe the incoming chunk and come straight from its
//! coding statistics; the nineteenth is the target bitrate. Only `mv_mean`
//! needs arithmetic beyond counting.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{ChunkStats, MotionVector, PictType};

pub const FEATURE_COUNT: usize = 19;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "pict_type_B",
    "pict_type_P",
    "mb_I",
    "mb_P",
    "mb_B",
    "mb_S",
    "part_16x16",
    "part_16x8",
    "part_8x16",
    "part_8x8",
    "part_4x4",
    "sar",
    "mv_count",
    "mv_mean",
    "color_range",
    "color_space",
    "color_primaries",
    "color_transfer",
    "output_bitrate",
];

pub mod idx {
    pub const PICT_B: usize = 0;
    pub const PICT_P: usize = 1;
    pub const MB_I: usize = 2;
    pub const MB_P: usize = 3;
    pub const MB_B: usize = 4;
    pub const MB_S: usize = 5;
    pub const PART_16X16: usize = 6;
    pub const PART_16X8: usize = 7;
    pub const PART_8X16: usize = 8;
    pub const PART_8X8: usize = 9;
    pub const PART_4X4: usize = 10;
    pub const SAR: usize = 11;
    pub const MV_COUNT: usize = 12;
    pub const MV_MEAN: usize = 13;
    pub const COLOR_RANGE: usize = 14;
    pub const COLOR_SPACE: usize = 15;
    pub const COLOR_PRIMARIES: usize = 16;
    pub const COLOR_TRANSFER: usize = 17;
    pub const OUTPUT_BITRATE: usize = 18;
}

pub fn feature_names() -> &'static [&'static str; FEATURE_COUNT] {
    &FEATURE_NAMES
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; FEATURE_COUNT]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn output_bitrate(&self) -> f64 {
        self.0[idx::OUTPUT_BITRATE]
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; FEATURE_COUNT] = values.try_into().map_err(|_| Error::Dimension {
            expected: FEATURE_COUNT,
            actual: values.len(),
        })?;
        Ok(FeatureVector(arr))
    }

    /// Comma-separated values in canonical order, shortest round-trip formatting.
    pub fn to_csv_row(&self) -> String {
        let mut s = String::new();
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let _ = write!(s, "{v}");
        }
        s
    }
}

pub fn csv_header() -> String {
    FEATURE_NAMES.join(",")
}

/// `|x| + |y|` for one motion vector.
pub fn mv_magnitude(mv: MotionVector) -> u64 {
    u64::from(mv.x.unsigned_abs()) + u64::from(mv.y.unsigned_abs())
}

/// Sum of motion vector magnitudes over every vector of every frame.
pub fn mv_chunk_sum(chunk: &ChunkStats) -> u64 {
    chunk
        .frames
        .iter()
        .flat_map(|f| f.motion_vectors.iter())
        .map(|mv| mv_magnitude(*mv))
        .sum()
}

pub fn mv_total_count(chunk: &ChunkStats) -> u64 {
    chunk.frames.iter().map(|f| f.motion_vectors.len() as u64).sum()
}

/// Mean magnitude over all vectors in the chunk; 0 when there are none.
pub fn mv_mean(chunk: &ChunkStats) -> f64 {
    let count = mv_total_count(chunk);
    if count == 0 {
        return 0.0;
    }
    mv_chunk_sum(chunk) as f64 / count as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CategoryField {
    Range,
    Space,
    Primaries,
    Transfer,
}

impl CategoryField {
    pub const ALL: [CategoryField; 4] = [
        CategoryField::Range,
        CategoryField::Space,
        CategoryField::Primaries,
        CategoryField::Transfer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CategoryField::Range => "range",
            CategoryField::Space => "space",
            CategoryField::Primaries => "primaries",
            CategoryField::Transfer => "transfer",
        }
    }
}

impl fmt::Display for CategoryField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CategoryField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CategoryField::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown codebook field `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CategoryCode {
    pub code: u32,
    pub known: bool,
}

/// Token to integer maps for the four color fields. Code 0 means "unknown".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoricalCodebook {
    maps: BTreeMap<CategoryField, BTreeMap<String, u32>>,
}

const DEFAULT_RANGE: &[&str] = &["tv", "pc"];
const DEFAULT_SPACE: &[&str] = &[
    "bt709",
    "fcc",
    "bt470bg",
    "smpte170m",
    "smpte240m",
    "ycgco",
    "bt2020nc",
    "bt2020c",
    "rgb",
];
const DEFAULT_PRIMARIES: &[&str] = &[
    "bt709",
    "bt470m",
    "bt470bg",
    "smpte170m",
    "smpte240m",
    "film",
    "bt2020",
    "smpte428",
    "smpte431",
    "smpte432",
];
const DEFAULT_TRANSFER: &[&str] = &[
    "bt709",
    "gamma22",
    "gamma28",
    "smpte170m",
    "smpte240m",
    "linear",
    "log100",
    "log316",
    "iec61966-2-4",
    "bt1361e",
    "iec61966-2-1",
    "bt2020-10",
    "bt2020-12",
    "smpte2084",
    "smpte428",
    "arib-std-b67",
];

impl Default for CategoricalCodebook {
    /// Common FFmpeg color tokens, numbered from 1 in listing order.
    fn default() -> Self {
        let mut maps = BTreeMap::new();
        for (field, tokens) in [
            (CategoryField::Range, DEFAULT_RANGE),
            (CategoryField::Space, DEFAULT_SPACE),
            (CategoryField::Primaries, DEFAULT_PRIMARIES),
            (CategoryField::Transfer, DEFAULT_TRANSFER),
        ] {
            let m = tokens
                .iter()
                .enumerate()
                .map(|(i, t)| (t.to_string(), i as u32 + 1))
                .collect();
            maps.insert(field, m);
        }
        CategoricalCodebook { maps }
    }
}

impl CategoricalCodebook {
    pub fn empty() -> Self {
        CategoricalCodebook {
            maps: CategoryField::ALL.iter().map(|f| (*f, BTreeMap::new())).collect(),
        }
    }

    pub fn insert(&mut self, field: CategoryField, token: &str, code: u32) -> Result<()> {
        if code == 0 {
            return Err(Error::invalid(format!("{field} `{token}`: code 0 is reserved")));
        }
        let map = self.maps.entry(field).or_default();
        if let Some((other, _)) = map.iter().find(|(t, c)| **c == code && t.as_str() != token) {
            return Err(Error::invalid(format!(
                "{field}: code {code} already assigned to `{other}`"
            )));
        }
        map.insert(token.to_string(), code);
        Ok(())
    }

    /// Looks up a token. Unknown tokens map to 0 and log a warning.
    pub fn encode(&self, field: CategoryField, token: &str) -> CategoryCode {
        match self.maps.get(&field).and_then(|m| m.get(token)) {
            Some(&code) => CategoryCode { code, known: true },
            None => {
                log::warn!("unknown {field} token `{token}`, encoding as 0");
                CategoryCode { code: 0, known: false }
            }
        }
    }

    /// Parses `field token code` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut book = CategoricalCodebook::empty();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [field, token, code] = parts[..] else {
                return Err(Error::parse(i + 1, "expected `field token code`"));
            };
            let field: CategoryField = field.parse().map_err(|e: Error| Error::parse(i + 1, e.to_string()))?;
            let code: u32 = code
                .parse()
                .map_err(|_| Error::parse(i + 1, format!("invalid code `{code}`")))?;
            book.insert(field, token, code)
                .map_err(|e| Error::parse(i + 1, e.to_string()))?;
        }
        Ok(book)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (field, map) in &self.maps {
            let mut entries: Vec<_> = map.iter().collect();
            entries.sort_by_key(|(_, c)| **c);
            for (token, code) in entries {
                let _ = writeln!(s, "{field} {token} {code}");
            }
        }
        s
    }
}

/// Builds the canonical feature vector for `chunk` transcoded at `output_bitrate` kbps.
pub fn extract_features(
    chunk: &ChunkStats,
    output_bitrate: f64,
    codebook: &CategoricalCodebook,
) -> Result<FeatureVector> {
    if !(output_bitrate.is_finite() && output_bitrate > 0.0) {
        return Err(Error::invalid(format!(
            "output bitrate must be positive, got {output_bitrate}"
        )));
    }
    let mut v = [0.0; FEATURE_COUNT];
    let mut sums = [0i64; 9];
    let mut mv_count = 0u64;
    let mut mv_sum = 0u64;
    for f in &chunk.frames {
        match f.pict_type {
            PictType::B => v[idx::PICT_B] += 1.0,
            PictType::P => v[idx::PICT_P] += 1.0,
            PictType::I => {}
        }
        let counts = [
            f.mb.intra,
            f.mb.predicted,
            f.mb.bipredicted,
            f.mb.skipped,
            f.partitions.p16x16,
            f.partitions.p16x8,
            f.partitions.p8x16,
            f.partitions.p8x8,
            f.partitions.p4x4,
        ];
        for (s, c) in sums.iter_mut().zip(counts) {
            *s += c;
        }
        mv_count += f.motion_vectors.len() as u64;
        mv_sum += f.motion_vectors.iter().map(|mv| mv_magnitude(*mv)).sum::<u64>();
    }
    for (k, s) in sums.iter().enumerate() {
        v[idx::MB_I + k] = *s as f64;
    }
    let meta = &chunk.meta;
    v[idx::SAR] = meta.sar.as_f64();
    v[idx::MV_COUNT] = mv_count as f64;
    v[idx::MV_MEAN] = if mv_count == 0 {
        0.0
    } else {
        mv_sum as f64 / mv_count as f64
    };
    v[idx::COLOR_RANGE] = codebook.encode(CategoryField::Range, &meta.color_range).code.into();
    v[idx::COLOR_SPACE] = codebook.encode(CategoryField::Space, &meta.color_space).code.into();
    v[idx::COLOR_PRIMARIES] = codebook
        .encode(CategoryField::Primaries, &meta.color_primaries)
        .code
        .into();
    v[idx::COLOR_TRANSFER] = codebook
        .encode(CategoryField::Transfer, &meta.color_transfer)
        .code
        .into();
    v[idx::OUTPUT_BITRATE] = output_bitrate;
    Ok(FeatureVector(v))
}
