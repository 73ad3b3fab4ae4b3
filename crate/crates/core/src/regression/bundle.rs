//! JSON container for a trained [`PresetModelBundle`].
//!
//! The header fields (`format`, `schema_version`, `feature_names`) are
//! checked before the model payload is decoded, so a file written for a
//! different layout fails with a schema error rather than a confusing
//! deserialization message.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Deserialize;

use super::PresetModelBundle;
use crate::error::{Error, Result};
use crate::features::{FEATURE_COUNT, FEATURE_NAMES};

pub const BUNDLE_FORMAT: &str = "presetpick-bundle";
pub const BUNDLE_SCHEMA_VERSION: u32 = 1;

#[derive(Deserialize)]
struct Header {
    format: String,
    schema_version: u32,
    feature_names: Vec<String>,
}

pub fn write_bundle(bundle: &PresetModelBundle, out: impl Write) -> Result<()> {
    let mut out = BufWriter::new(out);
    serde_json::to_writer(&mut out, bundle)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn save_bundle(bundle: &PresetModelBundle, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    write_bundle(bundle, file)
}

pub fn read_bundle(mut input: impl Read) -> Result<PresetModelBundle> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let header: Header = serde_json::from_str(&text)?;
    if header.format != BUNDLE_FORMAT {
        return Err(Error::Schema(format!(
            "not a model bundle (format `{}`)",
            header.format
        )));
    }
    if header.schema_version != BUNDLE_SCHEMA_VERSION {
        return Err(Error::Schema(format!(
            "bundle schema version {} is not supported (expected {BUNDLE_SCHEMA_VERSION})",
            header.schema_version
        )));
    }
    if header.feature_names != FEATURE_NAMES {
        return Err(Error::Schema(format!(
            "bundle feature layout [{}] differs from [{}]",
            header.feature_names.join(","),
            FEATURE_NAMES.join(",")
        )));
    }
    let bundle: PresetModelBundle = serde_json::from_str(&text)?;
    for (preset, entry) in bundle.presets.iter() {
        if entry.preset != preset {
            return Err(Error::Schema(format!(
                "entry for {preset} is labelled {}",
                entry.preset
            )));
        }
        if entry.model.feature_mask.len() != FEATURE_COUNT {
            return Err(Error::Schema(format!(
                "{preset} model mask has {} entries, expected {FEATURE_COUNT}",
                entry.model.feature_mask.len()
            )));
        }
    }
    Ok(bundle)
}

pub fn load_bundle(path: &Path) -> Result<PresetModelBundle> {
    let file = File::open(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    read_bundle(BufReader::new(file)).map_err(|e| e.context(path.display().to_string()))
}
