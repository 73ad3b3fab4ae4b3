use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{compute_metrics, fit_masked, Metrics, ModelSpec};
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<Metrics>,
    pub mean: Metrics,
}

/// Shuffles `0..n` with `seed` and cuts it into `k` contiguous folds whose
/// sizes differ by at most one. Each fold is returned sorted.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::invalid(format!("k-fold needs k >= 2, got {k}")));
    }
    if n < k {
        return Err(Error::invalid(format!("{n} samples are too few for {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        let mut fold = order[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    Ok(folds)
}

pub fn kfold_cv(spec: &ModelSpec, x: &[Vec<f64>], y: &[f64], k: usize, seed: u64) -> Result<CvReport> {
    let width = x.first().map_or(0, Vec::len);
    kfold_cv_masked(spec, x, y, &vec![true; width], k, seed)
}

pub fn kfold_cv_masked(
    spec: &ModelSpec,
    x: &[Vec<f64>],
    y: &[f64],
    mask: &[bool],
    k: usize,
    seed: u64,
) -> Result<CvReport> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("{} rows but {} targets", x.len(), y.len())));
    }
    let folds = kfold_indices(y.len(), k, seed)?;
    let n = y.len();
    let results = par::map(folds, |val| {
        let mut in_val = vec![false; n];
        val.iter().for_each(|&i| in_val[i] = true);
        let (mut tx, mut ty) = (Vec::new(), Vec::new());
        for i in (0..n).filter(|&i| !in_val[i]) {
            tx.push(x[i].clone());
            ty.push(y[i]);
        }
        let model = fit_masked(spec, &tx, &ty, mask)?;
        let truth: Vec<f64> = val.iter().map(|&i| y[i]).collect();
        let pred = val
            .iter()
            .map(|&i| model.predict(&x[i]))
            .collect::<Result<Vec<f64>>>()?;
        compute_metrics(&truth, &pred)
    });
    let folds = results.into_iter().collect::<Result<Vec<Metrics>>>()?;
    let mean = Metrics::mean_of(&folds);
    Ok(CvReport { folds, mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::tests::linear_data;
    use crate::regression::Family;
    use proptest::prelude::*;

    #[test]
    fn ten_samples_five_folds_of_two() {
        let folds = kfold_indices(10, 5, 1).unwrap();
        assert_eq!(folds.len(), 5);
        assert!(folds.iter().all(|f| f.len() == 2));
    }

    #[test]
    fn rejects_too_few() {
        assert!(kfold_indices(3, 5, 0).is_err());
        assert!(kfold_indices(10, 1, 0).is_err());
    }

    #[test]
    fn deterministic_report() {
        let (x, y) = linear_data(40, 3);
        let spec = ModelSpec::default_for(Family::Knn, 0);
        assert_eq!(
            kfold_cv(&spec, &x, &y, 5, 9).unwrap(),
            kfold_cv(&spec, &x, &y, 5, 9).unwrap()
        );
        assert_eq!(kfold_indices(40, 5, 9).unwrap(), kfold_indices(40, 5, 9).unwrap());
    }

    #[test]
    fn noise_free_linear_generalizes() {
        let (x, y) = linear_data(50, 4);
        let r = kfold_cv(&ModelSpec::default_for(Family::Linear, 0), &x, &y, 5, 2).unwrap();
        assert_eq!(r.folds.len(), 5);
        assert!(r.mean.mape <= 1e-6, "{}", r.mean.mape);
    }

    proptest! {
        #[test]
        fn folds_partition_indices(n in 2usize..300, k in 2usize..12, seed in any::<u64>()) {
            prop_assume!(n >= k);
            let folds = kfold_indices(n, k, seed).unwrap();
            let mut seen = vec![0u8; n];
            for f in &folds {
                for &i in f {
                    seen[i] += 1;
                }
            }
            prop_assert!(seen.iter().all(|c| *c == 1));
            let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }
}
