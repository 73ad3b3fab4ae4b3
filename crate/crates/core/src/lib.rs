//! Transcoding time prediction and preset selection for live streaming.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`stats`] parses per-chunk coding statistics (frame types, macroblock
//!    and partition counts, motion vectors, stream metadata).
//! 2. [`features`] turns a chunk plus a target bitrate into the fixed
//!    19-element [`FeatureVector`](features::FeatureVector).
//! 3. [`dataset`] assembles `(features, preset, time)` rows, either by timing
//!    an external transcoder or from the synthetic generator.
//! 4. [`regression`] trains one model per preset and keeps the one with the
//!    lowest cross-validated MAPE; [`featselect`] prunes each preset's inputs
//!    with recursive feature elimination.
//! 5. [`selector`] predicts all nine preset times for an incoming chunk and
//!    picks the slowest preset that fits the live budget. [`simulate`] replays
//!    that policy over measured ground truth.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dataset;
pub mod error;
pub mod featselect;
pub mod features;
pub mod preset;
pub mod reference;
pub mod regression;
pub mod report;
pub mod selector;
pub mod simulate;
pub mod stats;

mod par;

pub use error::{Error, Result};
pub use features::{FeatureVector, FEATURE_COUNT};
pub use preset::{Preset, PresetMap};
