use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest |y| accepted as a MAPE denominator.
pub const MIN_ABS_TARGET: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Mean absolute error, seconds.
    pub mae: f64,
    /// Mean squared error, seconds squared.
    pub mse: f64,
    /// Mean absolute percentage error as a ratio (0.05 = 5%).
    pub mape: f64,
}

impl Metrics {
    pub fn mean_of(items: &[Metrics]) -> Metrics {
        let n = items.len() as f64;
        Metrics {
            mae: items.iter().map(|m| m.mae).sum::<f64>() / n,
            mse: items.iter().map(|m| m.mse).sum::<f64>() / n,
            mape: items.iter().map(|m| m.mape).sum::<f64>() / n,
        }
    }
}

pub fn compute_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<Metrics> {
    if y_true.len() != y_pred.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} targets, {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::invalid("metrics need at least one sample"));
    }
    let mut abs = 0.0;
    let mut sq = 0.0;
    let mut pct = 0.0;
    for (i, (&t, &p)) in y_true.iter().zip(y_pred).enumerate() {
        if !(t.abs() >= MIN_ABS_TARGET) {
            return Err(Error::invalid(format!("target {i} is {t}, too close to zero for MAPE")));
        }
        let e = t - p;
        abs += e.abs();
        sq += e * e;
        pct += e.abs() / t.abs();
    }
    let n = y_true.len() as f64;
    Ok(Metrics {
        mae: abs / n,
        mse: sq / n,
        mape: pct / n,
    })
}
