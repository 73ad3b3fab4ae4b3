//! The nine x264 presets and per-preset containers.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// x264 preset, ordered by increasing slowness. `placebo` is not modeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Ultrafast,
    Superfast,
    Veryfast,
    Faster,
    Fast,
    Medium,
    Slow,
    Slower,
    Veryslow,
}

impl Preset {
    pub const COUNT: usize = 9;

    /// All presets, fastest first.
    pub const ALL: [Preset; 9] = [
        Preset::Ultrafast,
        Preset::Superfast,
        Preset::Veryfast,
        Preset::Faster,
        Preset::Fast,
        Preset::Medium,
        Preset::Slow,
        Preset::Slower,
        Preset::Veryslow,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(ordinal: usize) -> Option<Preset> {
        Preset::ALL.get(ordinal).copied()
    }

    /// Lowercase token as accepted by x264's `--preset`.
    pub fn token(self) -> &'static str {
        match self {
            Preset::Ultrafast => "ultrafast",
            Preset::Superfast => "superfast",
            Preset::Veryfast => "veryfast",
            Preset::Faster => "faster",
            Preset::Fast => "fast",
            Preset::Medium => "medium",
            Preset::Slow => "slow",
            Preset::Slower => "slower",
            Preset::Veryslow => "veryslow",
        }
    }

    /// Title-case label for text reports.
    pub fn label(self) -> &'static str {
        match self {
            Preset::Ultrafast => "Ultrafast",
            Preset::Superfast => "Superfast",
            Preset::Veryfast => "Veryfast",
            Preset::Faster => "Faster",
            Preset::Fast => "Fast",
            Preset::Medium => "Medium",
            Preset::Slow => "Slow",
            Preset::Slower => "Slower",
            Preset::Veryslow => "Very slow",
        }
    }

    /// Presets slowest first, the order the selector scans in.
    pub fn slowest_first() -> impl Iterator<Item = Preset> {
        Preset::ALL.into_iter().rev()
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.token() == s)
            .ok_or_else(|| Error::invalid(format!("unknown preset `{s}`")))
    }
}

/// One value per preset, indexed by [`Preset`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PresetMap<T>(pub [T; Preset::COUNT]);

impl<T> PresetMap<T> {
    pub fn from_fn(mut f: impl FnMut(Preset) -> T) -> Self {
        PresetMap(Preset::ALL.map(&mut f))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Preset, &T)> {
        Preset::ALL.into_iter().zip(self.0.iter())
    }

    pub fn values(&self) -> &[T; Preset::COUNT] {
        &self.0
    }

    pub fn map<U>(self, f: impl FnMut(T) -> U) -> PresetMap<U> {
        PresetMap(self.0.map(f))
    }
}

impl<T: Clone> PresetMap<T> {
    /// Builds a complete map from `(preset, value)` pairs; every preset must appear.
    pub fn try_from_pairs(pairs: impl IntoIterator<Item = (Preset, T)>) -> Result<Self> {
        let mut slots: [Option<T>; Preset::COUNT] = Default::default();
        for (p, v) in pairs {
            slots[p.ordinal()] = Some(v);
        }
        for p in Preset::ALL {
            if slots[p.ordinal()].is_none() {
                return Err(Error::MissingPreset(p));
            }
        }
        Ok(PresetMap(slots.map(|s| s.expect("checked above"))))
    }
}

impl<T> Index<Preset> for PresetMap<T> {
    type Output = T;
    fn index(&self, p: Preset) -> &T {
        &self.0[p.ordinal()]
    }
}

impl<T> IndexMut<Preset> for PresetMap<T> {
    fn index_mut(&mut self, p: Preset) -> &mut T {
        &mut self.0[p.ordinal()]
    }
}

/// Names of the encoder options that differ between presets.
pub const OPTION_NAMES: [&str; 15] = [
    "aq_mode",
    "b_adapt",
    "bframes",
    "deblock",
    "direct",
    "me",
    "merange",
    "cabac",
    "partitions",
    "rc_lookahead",
    "ref",
    "scenecut",
    "subme",
    "trellis",
    "weightp",
];

/// x264 option values per preset, read-only reference data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PresetOptions {
    pub aq_mode: u8,
    pub b_adapt: u8,
    pub bframes: u8,
    pub deblock: &'static str,
    pub direct: &'static str,
    pub me: &'static str,
    pub merange: u8,
    pub cabac: u8,
    pub partitions: &'static str,
    pub rc_lookahead: u8,
    pub reference_frames: u8,
    pub scenecut: u8,
    pub subme: u8,
    pub trellis: u8,
    pub weightp: u8,
}

const P4: &str = "p8×8, b8×8, i8×8, i4×4";

const OPTIONS: [PresetOptions; 9] = [
    opts(0, 0, 0, "[0:0:0]", "Spatial", "Dia", 16, 0, "None", 0, 1, 0, 0, 0, 0),
    opts(
        1,
        1,
        3,
        "[1:0:0]",
        "Spatial",
        "Dia",
        16,
        1,
        "i8×8, i4×4",
        0,
        1,
        40,
        1,
        0,
        1,
    ),
    opts(1, 1, 3, "[1:0:0]", "Spatial", "Hex", 16, 1, P4, 10, 1, 40, 2, 0, 1),
    opts(1, 1, 3, "[1:0:0]", "Spatial", "Hex", 16, 1, P4, 20, 2, 40, 4, 1, 1),
    opts(1, 1, 3, "[1:0:0]", "Spatial", "Hex", 16, 1, P4, 30, 2, 40, 6, 1, 1),
    opts(1, 1, 3, "[1:0:0]", "Spatial", "Hex", 16, 1, P4, 40, 3, 40, 7, 1, 2),
    opts(1, 2, 3, "[1:0:0]", "Auto", "Umh", 16, 1, "All", 50, 5, 40, 8, 1, 2),
    opts(1, 2, 3, "[1:0:0]", "Auto", "Umh", 16, 1, "All", 60, 8, 40, 9, 2, 2),
    opts(1, 2, 8, "[1:0:0]", "Auto", "Umh", 24, 1, "All", 60, 16, 40, 10, 2, 2),
];

#[allow(clippy::too_many_arguments)]
const fn opts(
    aq_mode: u8,
    b_adapt: u8,
    bframes: u8,
    deblock: &'static str,
    direct: &'static str,
    me: &'static str,
    merange: u8,
    cabac: u8,
    partitions: &'static str,
    rc_lookahead: u8,
    reference_frames: u8,
    scenecut: u8,
    subme: u8,
    trellis: u8,
    weightp: u8,
) -> PresetOptions {
    PresetOptions {
        aq_mode,
        b_adapt,
        bframes,
        deblock,
        direct,
        me,
        merange,
        cabac,
        partitions,
        rc_lookahead,
        reference_frames,
        scenecut,
        subme,
        trellis,
        weightp,
    }
}

impl PresetOptions {
    pub fn of(preset: Preset) -> &'static PresetOptions {
        &OPTIONS[preset.ordinal()]
    }

    /// Option values as display strings, in [`OPTION_NAMES`] order.
    pub fn values(&self) -> [String; 15] {
        [
            self.aq_mode.to_string(),
            self.b_adapt.to_string(),
            self.bframes.to_string(),
            self.deblock.to_string(),
            self.direct.to_string(),
            self.me.to_string(),
            self.merange.to_string(),
            self.cabac.to_string(),
            self.partitions.to_string(),
            self.rc_lookahead.to_string(),
            self.reference_frames.to_string(),
            self.scenecut.to_string(),
            self.subme.to_string(),
            self.trellis.to_string(),
            self.weightp.to_string(),
        ]
    }
}
