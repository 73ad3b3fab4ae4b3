//! Linear families. All of them fit on internally standardized columns and
//! keep the transform, so feature units never affect predictions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    /// Coefficients on standardized columns.
    pub coef: Vec<f64>,
    pub intercept: f64,
}

struct Standardized {
    means: Vec<f64>,
    scales: Vec<f64>,
    /// Column-major standardized data; constant columns are exactly zero.
    cols: Vec<Vec<f64>>,
    y_mean: f64,
    y_centered: Vec<f64>,
}

fn standardize(x: &[Vec<f64>], y: &[f64]) -> Standardized {
    let n = x.len() as f64;
    let p = x[0].len();
    let mut means = vec![0.0; p];
    let mut scales = vec![1.0; p];
    let mut cols = Vec::with_capacity(p);
    for j in 0..p {
        let mean = x.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = x.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        means[j] = mean;
        if sd > 1e-12 * (1.0 + mean.abs()) {
            scales[j] = sd;
            cols.push(x.iter().map(|r| (r[j] - mean) / sd).collect());
        } else {
            cols.push(vec![0.0; x.len()]);
        }
    }
    let y_mean = y.iter().sum::<f64>() / n;
    Standardized {
        means,
        scales,
        cols,
        y_mean,
        y_centered: y.iter().map(|v| v - y_mean).collect(),
    }
}

fn design(cols: &[Vec<f64>], with_intercept: bool) -> DMatrix<f64> {
    let n = cols.first().map_or(0, Vec::len);
    let offset = usize::from(with_intercept);
    DMatrix::from_fn(n, cols.len() + offset, |i, j| {
        if with_intercept && j == 0 {
            1.0
        } else {
            cols[j - offset][i]
        }
    })
}

/// Minimum-norm least squares via SVD; rank deficiency is tolerated.
fn lstsq(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>, String> {
    let svd = a.svd(true, true);
    let max_sv = svd.singular_values.max();
    let eps = max_sv * 1e-10;
    svd.solve(&b, eps).map_err(|e| e.to_string())
}

impl LinearModel {
    fn from_parts(s: &Standardized, coef: Vec<f64>, intercept: f64) -> Self {
        LinearModel {
            means: s.means.clone(),
            scales: s.scales.clone(),
            coef,
            intercept,
        }
    }

    pub fn fit_ols(x: &[Vec<f64>], y: &[f64]) -> Result<Self, String> {
        let s = standardize(x, y);
        let coef = lstsq(design(&s.cols, false), DVector::from_column_slice(&s.y_centered))?;
        Ok(Self::from_parts(&s, coef.iter().copied().collect(), s.y_mean))
    }

    pub fn fit_ridge(x: &[Vec<f64>], y: &[f64], alpha: f64) -> Result<Self, String> {
        let s = standardize(x, y);
        let z = design(&s.cols, false);
        let b = DVector::from_column_slice(&s.y_centered);
        let p = s.cols.len();
        let gram = z.transpose() * &z + DMatrix::<f64>::identity(p, p) * alpha;
        let rhs = z.transpose() * &b;
        let coef = match gram.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => lstsq(gram, rhs)?,
        };
        Ok(Self::from_parts(&s, coef.iter().copied().collect(), s.y_mean))
    }

    /// Coordinate descent on `1/(2n) ||r||^2 + alpha l1 ||w||_1 + alpha (1 - l1)/2 ||w||^2`.
    pub fn fit_elastic_net(x: &[Vec<f64>], y: &[f64], alpha: f64, l1_ratio: f64, max_iter: usize, tol: f64) -> Self {
        let s = standardize(x, y);
        let n = x.len() as f64;
        let p = s.cols.len();
        let col_sq: Vec<f64> = s
            .cols
            .iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>() / n)
            .collect();
        let l1 = alpha * l1_ratio;
        let l2 = alpha * (1.0 - l1_ratio);
        let mut w = vec![0.0; p];
        let mut r = s.y_centered.clone();
        for _ in 0..max_iter {
            let mut max_delta: f64 = 0.0;
            for j in 0..p {
                if col_sq[j] == 0.0 {
                    continue;
                }
                let col = &s.cols[j];
                let rho = col.iter().zip(&r).map(|(z, r)| z * r).sum::<f64>() / n + col_sq[j] * w[j];
                let new = soft_threshold(rho, l1) / (col_sq[j] + l2);
                let delta = new - w[j];
                if delta != 0.0 {
                    r.iter_mut().zip(col).for_each(|(ri, z)| *ri -= delta * z);
                    w[j] = new;
                    max_delta = max_delta.max(delta.abs());
                }
            }
            if max_delta < tol {
                break;
            }
        }
        Self::from_parts(&s, w, s.y_mean)
    }

    /// Iteratively reweighted least squares on the Huber loss. Residuals
    /// beyond `delta` robust-scale units get weight `delta * scale / |r|`.
    pub fn fit_huber(x: &[Vec<f64>], y: &[f64], delta: f64, max_iter: usize) -> Result<Self, String> {
        let s = standardize(x, y);
        let d = design(&s.cols, true);
        let yv = DVector::from_column_slice(y);
        let mut beta = lstsq(d.clone(), yv.clone())?;
        for _ in 0..max_iter {
            let resid: Vec<f64> = (&yv - &d * &beta).iter().copied().collect();
            let scale = 1.4826 * mad(&resid);
            if !(scale > 1e-12 * (1.0 + s.y_mean.abs())) {
                break;
            }
            let sqrt_w: Vec<f64> = resid
                .iter()
                .map(|r| {
                    let a = r.abs();
                    if a <= delta * scale {
                        1.0
                    } else {
                        (delta * scale / a).sqrt()
                    }
                })
                .collect();
            let dw = DMatrix::from_fn(d.nrows(), d.ncols(), |i, j| d[(i, j)] * sqrt_w[i]);
            let yw = DVector::from_fn(yv.len(), |i, _| yv[i] * sqrt_w[i]);
            let next = lstsq(dw, yw)?;
            let change = (&next - &beta).amax();
            beta = next;
            if change <= 1e-12 * (1.0 + beta.amax()) {
                break;
            }
        }
        let coef = beta.iter().skip(1).copied().collect();
        Ok(Self::from_parts(&s, coef, beta[0]))
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut acc = self.intercept;
        for (j, v) in x.iter().enumerate() {
            if self.coef[j] != 0.0 {
                acc += self.coef[j] * (v - self.means[j]) / self.scales[j];
            }
        }
        acc
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mad(v: &[f64]) -> f64 {
    let mut tmp = v.to_vec();
    let m = median(&mut tmp);
    let mut dev: Vec<f64> = v.iter().map(|x| (x - m).abs()).collect();
    median(&mut dev)
}
