//! Chunk statistics files: per-frame coding metadata for one chunk.
//!
//! The format is line-oriented UTF-8 text. Line 1 carries stream metadata,
//! every following line describes one frame:
//!
//! ```text
//! meta sar=1/1 range=tv space=bt709 primaries=bt709 transfer=bt709 fps=30/1 bitrate=8000
//! frame 0 type=I mb=I:8160,P:0,B:0,S:0 part=16x16:4000,16x8:0,8x16:0,8x8:2000,4x4:2160 mv=
//! frame 1 type=P mb=I:12,P:6000,B:0,S:2148 part=16x16:5000,16x8:300,8x16:280,8x8:400,4x4:32 mv=1:-2;0:3
//! ```
//!
//! Motion vectors stay in the producer's native integer units.

use std::fmt::{self, Write as _};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frames per chunk at 30 fps for a 4 second segment.
pub const DEFAULT_CHUNK_FRAMES: usize = 120;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rational {
    pub num: u32,
    pub den: u32,
}

impl Rational {
    pub fn as_f64(self) -> f64 {
        f64::from(self.num) / f64::from(self.den)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamMeta {
    pub sar: Rational,
    pub color_range: String,
    pub color_space: String,
    pub color_primaries: String,
    pub color_transfer: String,
    pub frame_rate: Rational,
    /// Source bitrate in kbps.
    pub source_bitrate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PictType {
    I,
    P,
    B,
}

impl PictType {
    fn token(self) -> &'static str {
        match self {
            PictType::I => "I",
            PictType::P => "P",
            PictType::B => "B",
        }
    }
}

/// Macroblock counts by type. Signed so that invalid values injected after
/// parsing can still be represented and reported by [`validate_chunk`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MbCounts {
    pub intra: i64,
    pub predicted: i64,
    pub bipredicted: i64,
    pub skipped: i64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionCounts {
    pub p16x16: i64,
    pub p16x8: i64,
    pub p8x16: i64,
    pub p8x8: i64,
    pub p4x4: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotionVector {
    pub x: i32,
    pub y: i32,
}

impl MotionVector {
    pub fn new(x: i32, y: i32) -> Self {
        MotionVector { x, y }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameStats {
    pub index: usize,
    pub pict_type: PictType,
    pub mb: MbCounts,
    pub partitions: PartitionCounts,
    pub motion_vectors: Vec<MotionVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkStats {
    pub chunk_id: String,
    pub meta: StreamMeta,
    pub frames: Vec<FrameStats>,
}

impl ChunkStats {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn count_pict_type(&self, ty: PictType) -> usize {
        self.frames.iter().filter(|f| f.pict_type == ty).count()
    }
}

/// Reads a chunk statistics file from disk, using the file stem as chunk id.
pub fn read_chunk_stats(path: &Path) -> Result<ChunkStats> {
    let file = std::fs::File::open(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    let chunk_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_chunk_stats(std::io::BufReader::new(file), &chunk_id).map_err(|e| e.context(path.display().to_string()))
}

pub fn parse_chunk_stats(reader: impl BufRead, chunk_id: &str) -> Result<ChunkStats> {
    let mut meta = None;
    let mut frames = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() {
            continue;
        }
        if meta.is_none() {
            meta = Some(parse_meta(line).map_err(|m| Error::parse(lineno, m))?);
            continue;
        }
        let frame = parse_frame(line).map_err(|m| Error::parse(lineno, m))?;
        if frame.index != frames.len() {
            return Err(Error::parse(
                lineno,
                format!("frame index {} out of sequence, expected {}", frame.index, frames.len()),
            ));
        }
        frames.push(frame);
    }
    let meta = meta.ok_or_else(|| Error::parse(1, "missing meta header record"))?;
    if frames.is_empty() {
        return Err(Error::parse(2, "chunk has no frame records"));
    }
    Ok(ChunkStats {
        chunk_id: chunk_id.to_string(),
        meta,
        frames,
    })
}

pub fn parse_chunk_stats_str(text: &str, chunk_id: &str) -> Result<ChunkStats> {
    parse_chunk_stats(text.as_bytes(), chunk_id)
}

/// Splits `key=value` fields after the record tag, requiring exactly `keys` in order.
fn fields<'a>(rest: &'a str, keys: &[&str]) -> Result<Vec<&'a str>, String> {
    let parts: Vec<&str> = rest.split(' ').collect();
    if parts.len() != keys.len() {
        let present: Vec<&str> = parts.iter().map(|p| p.split('=').next().unwrap_or("")).collect();
        let missing: Vec<&&str> = keys.iter().filter(|k| !present.contains(k)).collect();
        return Err(match missing.first() {
            Some(k) => format!("missing field `{k}`"),
            None => format!("expected {} fields, found {}", keys.len(), parts.len()),
        });
    }
    parts
        .iter()
        .zip(keys)
        .map(|(part, key)| match part.split_once('=') {
            Some((k, v)) if k == *key => Ok(v),
            _ => Err(format!("expected field `{key}`, found `{part}`")),
        })
        .collect()
}

fn parse_meta(line: &str) -> Result<StreamMeta, String> {
    let rest = line
        .strip_prefix("meta ")
        .ok_or_else(|| "malformed header record: expected `meta ...`".to_string())?;
    let f = fields(
        rest,
        &["sar", "range", "space", "primaries", "transfer", "fps", "bitrate"],
    )?;
    let sar = parse_rational(f[0], "sar")?;
    let frame_rate = parse_rational(f[5], "fps")?;
    let source_bitrate: f64 = f[6].parse().map_err(|_| format!("invalid bitrate `{}`", f[6]))?;
    if !(source_bitrate.is_finite() && source_bitrate > 0.0) {
        return Err(format!("bitrate must be positive, got `{}`", f[6]));
    }
    Ok(StreamMeta {
        sar,
        color_range: parse_token(f[1], "range")?,
        color_space: parse_token(f[2], "space")?,
        color_primaries: parse_token(f[3], "primaries")?,
        color_transfer: parse_token(f[4], "transfer")?,
        frame_rate,
        source_bitrate,
    })
}

fn parse_rational(s: &str, what: &str) -> Result<Rational, String> {
    let (n, d) = s
        .split_once('/')
        .ok_or_else(|| format!("{what} must be `<num>/<den>`, got `{s}`"))?;
    let num: u32 = n.parse().map_err(|_| format!("invalid {what} numerator `{n}`"))?;
    let den: u32 = d.parse().map_err(|_| format!("invalid {what} denominator `{d}`"))?;
    if num == 0 || den == 0 {
        return Err(format!("{what} terms must be positive, got `{s}`"));
    }
    Ok(Rational { num, den })
}

fn parse_token(s: &str, what: &str) -> Result<String, String> {
    let ok = !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || matches!(b, b'-' | b'_' | b'.'));
    if ok {
        Ok(s.to_string())
    } else {
        Err(format!("{what} token `{s}` is not lowercase ASCII"))
    }
}

fn parse_frame(line: &str) -> Result<FrameStats, String> {
    let rest = line
        .strip_prefix("frame ")
        .ok_or_else(|| format!("expected frame record, found `{line}`"))?;
    let (index, rest) = rest
        .split_once(' ')
        .ok_or_else(|| "frame record has no fields".to_string())?;
    let index: usize = index.parse().map_err(|_| format!("invalid frame index `{index}`"))?;
    let f = fields(rest, &["type", "mb", "part", "mv"])?;
    let pict_type = match f[0] {
        "I" => PictType::I,
        "P" => PictType::P,
        "B" => PictType::B,
        other => return Err(format!("unknown pict_type `{other}`")),
    };
    let mb = parse_counts(f[1], &["I", "P", "B", "S"])?;
    let part = parse_counts(f[2], &["16x16", "16x8", "8x16", "8x8", "4x4"])?;
    let motion_vectors = if f[3].is_empty() {
        Vec::new()
    } else {
        f[3].split(';').map(parse_mv).collect::<Result<_, _>>()?
    };
    Ok(FrameStats {
        index,
        pict_type,
        mb: MbCounts {
            intra: mb[0],
            predicted: mb[1],
            bipredicted: mb[2],
            skipped: mb[3],
        },
        partitions: PartitionCounts {
            p16x16: part[0],
            p16x8: part[1],
            p8x16: part[2],
            p8x8: part[3],
            p4x4: part[4],
        },
        motion_vectors,
    })
}

fn parse_counts(s: &str, keys: &[&str]) -> Result<Vec<i64>, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != keys.len() {
        return Err(format!("expected {} counts in `{s}`", keys.len()));
    }
    parts
        .iter()
        .zip(keys)
        .map(|(part, key)| {
            let v = part
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix(':'))
                .ok_or_else(|| format!("expected `{key}:<n>`, found `{part}`"))?;
            let n: i64 = v.parse().map_err(|_| format!("invalid count `{part}`"))?;
            if n < 0 {
                return Err(format!("negative count `{part}`"));
            }
            Ok(n)
        })
        .collect()
}

fn parse_mv(s: &str) -> Result<MotionVector, String> {
    let (x, y) = s
        .split_once(':')
        .ok_or_else(|| format!("motion vector must be `<x>:<y>`, got `{s}`"))?;
    let x = x.parse().map_err(|_| format!("invalid mv component `{x}`"))?;
    let y = y.parse().map_err(|_| format!("invalid mv component `{y}`"))?;
    Ok(MotionVector { x, y })
}

pub fn write_chunk_stats(chunk: &ChunkStats, mut out: impl Write) -> Result<()> {
    out.write_all(format_chunk_stats(chunk).as_bytes())?;
    Ok(())
}

pub fn format_chunk_stats(chunk: &ChunkStats) -> String {
    let m = &chunk.meta;
    let mut s = format!(
        "meta sar={} range={} space={} primaries={} transfer={} fps={} bitrate={}\n",
        m.sar, m.color_range, m.color_space, m.color_primaries, m.color_transfer, m.frame_rate, m.source_bitrate
    );
    for f in &chunk.frames {
        let mb = &f.mb;
        let p = &f.partitions;
        let _ = write!(
            s,
            "frame {} type={} mb=I:{},P:{},B:{},S:{} part=16x16:{},16x8:{},8x16:{},8x8:{},4x4:{} mv=",
            f.index,
            f.pict_type.token(),
            mb.intra,
            mb.predicted,
            mb.bipredicted,
            mb.skipped,
            p.p16x16,
            p.p16x8,
            p.p8x16,
            p.p8x8,
            p.p4x4
        );
        for (i, mv) in f.motion_vectors.iter().enumerate() {
            if i > 0 {
                s.push(';');
            }
            let _ = write!(s, "{}:{}", mv.x, mv.y);
        }
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Finding {
    FrameCountMismatch {
        expected: usize,
        actual: usize,
    },
    NonContiguousIndex {
        position: usize,
        index: usize,
    },
    NegativeCount {
        frame: usize,
        field: &'static str,
        value: i64,
    },
    NonPositiveRational {
        field: &'static str,
    },
    NonPositiveBitrate,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::FrameCountMismatch { expected, actual } => {
                write!(f, "frame count mismatch: expected {expected}, found {actual}")
            }
            Finding::NonContiguousIndex { position, index } => {
                write!(f, "frame at position {position} has index {index}")
            }
            Finding::NegativeCount { frame, field, value } => {
                write!(f, "frame {frame}: negative {field} count {value}")
            }
            Finding::NonPositiveRational { field } => write!(f, "{field} has a zero term"),
            Finding::NonPositiveBitrate => f.write_str("source bitrate is not positive"),
        }
    }
}

/// Checks the frame count and every type invariant, one finding per violation.
pub fn validate_chunk(chunk: &ChunkStats, expected_frames: usize) -> Vec<Finding> {
    let mut out = Vec::new();
    if chunk.frames.len() != expected_frames {
        out.push(Finding::FrameCountMismatch {
            expected: expected_frames,
            actual: chunk.frames.len(),
        });
    }
    let m = &chunk.meta;
    if m.sar.num == 0 || m.sar.den == 0 {
        out.push(Finding::NonPositiveRational { field: "sar" });
    }
    if m.frame_rate.num == 0 || m.frame_rate.den == 0 {
        out.push(Finding::NonPositiveRational { field: "fps" });
    }
    if !(m.source_bitrate.is_finite() && m.source_bitrate > 0.0) {
        out.push(Finding::NonPositiveBitrate);
    }
    for (pos, frame) in chunk.frames.iter().enumerate() {
        if frame.index != pos {
            out.push(Finding::NonContiguousIndex {
                position: pos,
                index: frame.index,
            });
        }
        let mb = &frame.mb;
        let p = &frame.partitions;
        let counts = [
            ("mb_I", mb.intra),
            ("mb_P", mb.predicted),
            ("mb_B", mb.bipredicted),
            ("mb_S", mb.skipped),
            ("part_16x16", p.p16x16),
            ("part_16x8", p.p16x8),
            ("part_8x16", p.p8x16),
            ("part_8x8", p.p8x8),
            ("part_4x4", p.p4x4),
        ];
        for (field, value) in counts {
            if value < 0 {
                out.push(Finding::NegativeCount {
                    frame: frame.index,
                    field,
                    value,
                });
            }
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) const TWO_FRAMES: &str = "\
meta sar=1/1 range=tv space=bt709 primaries=bt709 transfer=bt709 fps=30/1 bitrate=8000
frame 0 type=I mb=I:396,P:0,B:0,S:0 part=16x16:200,16x8:0,8x16:0,8x8:100,4x4:96 mv=
frame 1 type=P mb=I:4,P:300,B:0,S:92 part=16x16:250,16x8:20,8x16:10,8x8:24,4x4:0 mv=1:1;1:1;1:1
";

    #[test]
    fn parses_minimal_file() {
        let c = parse_chunk_stats_str(TWO_FRAMES, "v1").unwrap();
        assert_eq!(c.frame_count(), 2);
        assert_eq!(c.count_pict_type(PictType::B), 0);
        assert_eq!(c.count_pict_type(PictType::P), 1);
        assert_eq!(c.meta.sar, Rational { num: 1, den: 1 });
        assert_eq!(c.meta.frame_rate.as_f64(), 30.0);
        assert_eq!(c.frames[1].motion_vectors.len(), 3);
        assert_eq!(c.frames[1].mb.skipped, 92);
        assert_eq!(c.chunk_id, "v1");
    }

    fn line_of(err: Error) -> usize {
        match err {
            Error::Parse { line, .. } => line,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_pict_type_names_line() {
        let bad = TWO_FRAMES.replace("frame 1 type=P ", "frame 1 ");
        let err = parse_chunk_stats_str(&bad, "x").unwrap_err();
        assert!(err.to_string().contains("type"), "{err}");
        assert_eq!(line_of(err), 3);
    }

    #[test]
    fn rejects_bad_records() {
        let cases = [
            (TWO_FRAMES.replace("meta sar", "mta sar"), 1),
            (TWO_FRAMES.replace("type=P", "type=X"), 3),
            (TWO_FRAMES.replace("frame 1", "frame 2"), 3),
            (TWO_FRAMES.replace("P:300", "P:-300"), 3),
            (TWO_FRAMES.replace("sar=1/1", "sar=0/1"), 1),
            (TWO_FRAMES.replace("range=tv", "range=TV"), 1),
            (TWO_FRAMES.replace("mv=1:1;", "mv=1;"), 3),
            (TWO_FRAMES.replace("bitrate=8000", "bitrate=-1"), 1),
        ];
        for (text, line) in cases {
            let err = parse_chunk_stats_str(&text, "x").unwrap_err();
            assert_eq!(line_of(err), line, "{text}");
        }
        assert!(parse_chunk_stats_str("", "x").is_err());
        let header_only = TWO_FRAMES.lines().next().unwrap();
        assert!(parse_chunk_stats_str(header_only, "x").is_err());
    }

    #[test]
    fn validate_frame_count_and_invariants() {
        let c = parse_chunk_stats_str(TWO_FRAMES, "x").unwrap();
        assert!(validate_chunk(&c, 2).is_empty());
        let findings = validate_chunk(&c, 3);
        assert_eq!(findings.len(), 1);
        assert!(findings[0].to_string().starts_with("frame count mismatch"));

        let mut bad = c.clone();
        bad.frames[0].mb.bipredicted = -1;
        let findings = validate_chunk(&bad, 2);
        assert_eq!(
            findings,
            vec![Finding::NegativeCount {
                frame: 0,
                field: "mb_B",
                value: -1
            }]
        );
    }

    #[test]
    fn validate_default_chunk_size() {
        let c = sample_chunk(DEFAULT_CHUNK_FRAMES, 7);
        assert!(validate_chunk(&c, DEFAULT_CHUNK_FRAMES).is_empty());
        let short = sample_chunk(119, 7);
        let f = validate_chunk(&short, DEFAULT_CHUNK_FRAMES);
        assert_eq!(
            f,
            vec![Finding::FrameCountMismatch {
                expected: 120,
                actual: 119
            }]
        );
    }

    /// Deterministic test chunk: I frame then alternating P/B with a few MVs each.
    pub(crate) fn sample_chunk(frames: usize, seed: i32) -> ChunkStats {
        let frames = (0..frames)
            .map(|i| {
                let pict_type = match i {
                    0 => PictType::I,
                    _ if i % 3 == 0 => PictType::P,
                    _ => PictType::B,
                };
                let k = i as i32 + seed;
                let motion_vectors = if pict_type == PictType::I {
                    vec![]
                } else {
                    (0..(k % 5 + 1)).map(|j| MotionVector::new(k % 7 - 3, j - 2)).collect()
                };
                FrameStats {
                    index: i,
                    pict_type,
                    mb: MbCounts {
                        intra: 10 + i as i64,
                        predicted: 200,
                        bipredicted: 100,
                        skipped: 86,
                    },
                    partitions: PartitionCounts {
                        p16x16: 250,
                        p16x8: 20,
                        p8x16: 20,
                        p8x8: 80,
                        p4x4: 26,
                    },
                    motion_vectors,
                }
            })
            .collect();
        ChunkStats {
            chunk_id: format!("sample{seed}"),
            meta: StreamMeta {
                sar: Rational { num: 1, den: 1 },
                color_range: "tv".into(),
                color_space: "bt709".into(),
                color_primaries: "bt709".into(),
                color_transfer: "bt709".into(),
                frame_rate: Rational { num: 30, den: 1 },
                source_bitrate: 8000.0,
            },
            frames,
        }
    }

    fn token() -> impl Strategy<Value = String> {
        "[a-z0-9][a-z0-9_.-]{0,11}"
    }

    fn arb_frame() -> impl Strategy<Value = (PictType, [i64; 9], Vec<(i32, i32)>)> {
        (
            prop_oneof![Just(PictType::I), Just(PictType::P), Just(PictType::B)],
            prop::array::uniform9(0i64..1_000_000),
            prop::collection::vec((any::<i32>(), any::<i32>()), 0..12),
        )
    }

    fn arb_chunk() -> impl Strategy<Value = ChunkStats> {
        (
            (1u32..200, 1u32..200, 1u32..120_000, 1u32..1001),
            (token(), token(), token(), token()),
            (1u64..u64::MAX).prop_map(|b| (b % 1_000_000_000) as f64 / 1000.0 + 0.001),
            prop::collection::vec(arb_frame(), 1..20),
        )
            .prop_map(|((sn, sd, fnum, fden), (r, s, p, t), bitrate, frames)| ChunkStats {
                chunk_id: "rt".into(),
                meta: StreamMeta {
                    sar: Rational { num: sn, den: sd },
                    color_range: r,
                    color_space: s,
                    color_primaries: p,
                    color_transfer: t,
                    frame_rate: Rational { num: fnum, den: fden },
                    source_bitrate: bitrate,
                },
                frames: frames
                    .into_iter()
                    .enumerate()
                    .map(|(index, (pict_type, c, mvs))| FrameStats {
                        index,
                        pict_type,
                        mb: MbCounts {
                            intra: c[0],
                            predicted: c[1],
                            bipredicted: c[2],
                            skipped: c[3],
                        },
                        partitions: PartitionCounts {
                            p16x16: c[4],
                            p16x8: c[5],
                            p8x16: c[6],
                            p8x8: c[7],
                            p4x4: c[8],
                        },
                        motion_vectors: mvs.into_iter().map(|(x, y)| MotionVector::new(x, y)).collect(),
                    })
                    .collect(),
            })
    }

    proptest! {
        #[test]
        fn write_then_parse_is_identity(chunk in arb_chunk()) {
            let text = format_chunk_stats(&chunk);
            let back = parse_chunk_stats_str(&text, "rt").unwrap();
            prop_assert_eq!(back, chunk);
        }
    }
}
