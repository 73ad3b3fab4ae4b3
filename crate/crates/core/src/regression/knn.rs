use serde::{Deserialize, Serialize};

/// k-nearest-neighbour regressor with inverse-distance weights on
/// standardized features. Exact matches (distance 0) take over the vote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    /// Standardized training rows.
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl KnnModel {
    pub fn fit(x: &[Vec<f64>], y: &[f64], k: usize) -> Self {
        let n = x.len() as f64;
        let p = x[0].len();
        let mut means = vec![0.0; p];
        let mut scales = vec![1.0; p];
        for j in 0..p {
            let mean = x.iter().map(|r| r[j]).sum::<f64>() / n;
            let sd = (x.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n).sqrt();
            means[j] = mean;
            if sd > 0.0 {
                scales[j] = sd;
            }
        }
        let rows = x
            .iter()
            .map(|r| r.iter().enumerate().map(|(j, v)| (v - means[j]) / scales[j]).collect())
            .collect();
        KnnModel {
            k: k.min(x.len()),
            means,
            scales,
            rows,
            targets: y.to_vec(),
        }
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let z: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(j, v)| (v - self.means[j]) / self.scales[j])
            .collect();
        let mut dist: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(), i))
            .collect();
        let k = self.k;
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dist.truncate(k);
        }
        let exact: Vec<f64> = dist
            .iter()
            .filter(|(d, _)| *d == 0.0)
            .map(|(_, i)| self.targets[*i])
            .collect();
        if !exact.is_empty() {
            return exact.iter().sum::<f64>() / exact.len() as f64;
        }
        let (num, den) = dist.iter().fold((0.0, 0.0), |(num, den), (d, i)| {
            let w = 1.0 / d;
            (num + w * self.targets[*i], den + w)
        });
        num / den
    }
}
