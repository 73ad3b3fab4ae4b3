//! Run configuration read from `key = value` text.
//!
//! ```text
//! # paths are relative to the working directory
//! dataset = data/train.csv
//! bundle = models/bundle.json
//! chunk_duration = 4.0
//! overhead = 0.021
//! k_folds = 5
//! ```
//!
//! Command-line flags override whatever the file sets.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::selector::{compute_budget, BudgetSpec, DEFAULT_CHUNK_DURATION, DEFAULT_PREDICTION_OVERHEAD};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_K_FOLDS: usize = 5;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.75;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub bundle: Option<PathBuf>,
    pub codebook: Option<PathBuf>,
    pub reports: Option<PathBuf>,
    pub chunk_duration: f64,
    pub overhead: f64,
    /// Multiplier applied to predictions before the budget check.
    pub margin: f64,
    pub seed: u64,
    pub k_folds: usize,
    /// Share of chunks used for training when a held-out split is made.
    pub train_fraction: f64,
    /// Timed runs per cell when measuring; the median is kept.
    pub repeat: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            bundle: None,
            codebook: None,
            reports: None,
            chunk_duration: DEFAULT_CHUNK_DURATION,
            overhead: DEFAULT_PREDICTION_OVERHEAD,
            margin: 1.0,
            seed: DEFAULT_SEED,
            k_folds: DEFAULT_K_FOLDS,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            repeat: 1,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, format!("expected `key = value`, got `{line}`")))?;
            cfg.set(key.trim(), value.trim()).map_err(|e| match e {
                Error::InvalidInput(m) => Error::parse(i + 1, m),
                other => other,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::File {
            path: path.to_path_buf(),
            source,
        })?;
        RunConfig::parse(&text).map_err(|e| e.context(path.display().to_string()))
    }

    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::invalid(format!("`{key}` has invalid value `{value}`")))
        }
        match key {
            "dataset" => self.dataset = Some(value.into()),
            "bundle" => self.bundle = Some(value.into()),
            "codebook" => self.codebook = Some(value.into()),
            "reports" => self.reports = Some(value.into()),
            "chunk_duration" => self.chunk_duration = num(key, value)?,
            "overhead" => self.overhead = num(key, value)?,
            "margin" => self.margin = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "k_folds" => self.k_folds = num(key, value)?,
            "train_fraction" => self.train_fraction = num(key, value)?,
            "repeat" => self.repeat = num(key, value)?,
            _ => return Err(Error::invalid(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.chunk_duration > 0.0) {
            return Err(Error::invalid("chunk_duration must be positive"));
        }
        if !(self.overhead >= 0.0) {
            return Err(Error::invalid("overhead must be >= 0"));
        }
        if !(self.margin > 0.0) {
            return Err(Error::invalid("margin must be positive"));
        }
        if self.k_folds < 2 {
            return Err(Error::invalid("k_folds must be >= 2"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid("train_fraction must lie in (0, 1)"));
        }
        if self.repeat == 0 {
            return Err(Error::invalid("repeat must be >= 1"));
        }
        self.budget().map(|_| ())
    }

    pub fn budget(&self) -> Result<BudgetSpec> {
        compute_budget(self.chunk_duration, self.overhead)
    }
}
