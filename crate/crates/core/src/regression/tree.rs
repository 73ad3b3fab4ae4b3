//! CART regression trees with exhaustive (presorted) or randomized splits.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TreeParams;

const LEAF: i32 = -1;

/// Flat tree: node `i` is a leaf when `feature[i] < 0`, in which case
/// `value[i]` is its prediction; otherwise `value[i]` is the split threshold
/// and samples with `x[feature] <= threshold` go to `left[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub feature: Vec<i32>,
    pub value: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    /// Total squared-error decrease per input column.
    pub importance: Vec<f64>,
}

pub(crate) enum SplitRule<'r> {
    Best,
    /// One uniform threshold per feature, keep the best of those.
    Random(&'r mut ChaCha8Rng),
}

impl RegressionTree {
    pub fn fit_best(x: &[Vec<f64>], y: &[f64], params: &TreeParams) -> Self {
        let cols = to_columns(x);
        let rows: Vec<usize> = (0..y.len()).collect();
        grow(&cols, y, &rows, params, SplitRule::Best)
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            let f = self.feature[i];
            if f < 0 {
                return self.value[i];
            }
            i = if x[f as usize] <= self.value[i] {
                self.left[i] as usize
            } else {
                self.right[i] as usize
            };
        }
    }

    pub fn node_count(&self) -> usize {
        self.feature.len()
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &RegressionTree, i: usize) -> usize {
            if t.feature[i] < 0 {
                0
            } else {
                1 + walk(t, t.left[i] as usize).max(walk(t, t.right[i] as usize))
            }
        }
        walk(self, 0)
    }
}

pub(crate) fn to_columns(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = x.first().map_or(0, Vec::len);
    (0..p).map(|j| x.iter().map(|r| r[j]).collect()).collect()
}

/// Grows one tree on the samples listed in `rows` (repeats allowed).
pub(crate) fn grow(
    cols: &[Vec<f64>],
    y: &[f64],
    rows: &[usize],
    params: &TreeParams,
    rule: SplitRule,
) -> RegressionTree {
    let n = rows.len();
    let p = cols.len();
    let vals: Vec<Vec<f64>> = cols.iter().map(|c| rows.iter().map(|&r| c[r]).collect()).collect();
    let targets: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
    let presorted = matches!(rule, SplitRule::Best);
    let order: Vec<Vec<u32>> = if presorted {
        vals.iter()
            .map(|v| {
                let mut o: Vec<u32> = (0..n as u32).collect();
                o.sort_by(|&a, &b| v[a as usize].total_cmp(&v[b as usize]).then(a.cmp(&b)));
                o
            })
            .collect()
    } else {
        vec![(0..n as u32).collect()]
    };
    let mut g = Grower {
        vals,
        targets,
        params: *params,
        order,
        buf: vec![0; n],
        goes_left: vec![false; n],
        rule,
        tree: RegressionTree {
            feature: Vec::new(),
            value: Vec::new(),
            left: Vec::new(),
            right: Vec::new(),
            importance: vec![0.0; p],
        },
    };
    g.build(0, n, 0);
    g.tree
}

struct Grower<'r> {
    vals: Vec<Vec<f64>>,
    targets: Vec<f64>,
    params: TreeParams,
    order: Vec<Vec<u32>>,
    buf: Vec<u32>,
    goes_left: Vec<bool>,
    rule: SplitRule<'r>,
    tree: RegressionTree,
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Grower<'_> {
    fn build(&mut self, start: usize, end: usize, depth: usize) -> u32 {
        let id = self.tree.feature.len();
        self.tree.feature.push(LEAF);
        self.tree.value.push(0.0);
        self.tree.left.push(0);
        self.tree.right.push(0);

        let n = end - start;
        let positions = &self.order[0][start..end];
        let sum: f64 = positions.iter().map(|&p| self.targets[p as usize]).sum();
        let mean = sum / n as f64;
        let sse: f64 = positions
            .iter()
            .map(|&p| (self.targets[p as usize] - mean).powi(2))
            .sum();
        self.tree.value[id] = mean;

        let leaf_min = self.params.min_samples_leaf;
        if depth >= self.params.max_depth || n < 2 * leaf_min || sse <= 0.0 {
            return id as u32;
        }
        let split = match self.rule {
            SplitRule::Best => self.best_split(start, end, sum),
            SplitRule::Random(_) => self.random_split(start, end, sum),
        };
        let Some(split) = split.filter(|s| s.gain > 1e-12 * sse) else {
            return id as u32;
        };

        let mid = self.partition(start, end, &split);
        self.tree.importance[split.feature] += split.gain;
        let left = self.build(start, mid, depth + 1);
        let right = self.build(mid, end, depth + 1);
        self.tree.feature[id] = split.feature as i32;
        self.tree.value[id] = split.threshold;
        self.tree.left[id] = left;
        self.tree.right[id] = right;
        id as u32
    }

    fn best_split(&self, start: usize, end: usize, sum: f64) -> Option<Split> {
        let n = end - start;
        let leaf_min = self.params.min_samples_leaf;
        let base = sum * sum / n as f64;
        let mut best: Option<Split> = None;
        for (f, vals) in self.vals.iter().enumerate() {
            let list = &self.order[f][start..end];
            let mut sl = 0.0;
            for i in 0..n - 1 {
                let p = list[i] as usize;
                sl += self.targets[p];
                let nl = i + 1;
                let nr = n - nl;
                if nr < leaf_min {
                    break;
                }
                if nl < leaf_min {
                    continue;
                }
                let a = vals[p];
                let b = vals[list[i + 1] as usize];
                if b <= a {
                    continue;
                }
                let sr = sum - sl;
                let gain = sl * sl / nl as f64 + sr * sr / nr as f64 - base;
                if best.as_ref().is_none_or(|s| gain > s.gain) {
                    let mut threshold = a + (b - a) / 2.0;
                    if threshold >= b {
                        threshold = a;
                    }
                    best = Some(Split {
                        feature: f,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }

    fn random_split(&mut self, start: usize, end: usize, sum: f64) -> Option<Split> {
        let SplitRule::Random(rng) = &mut self.rule else {
            unreachable!("random_split requires a random rule")
        };
        let n = end - start;
        let leaf_min = self.params.min_samples_leaf;
        let base = sum * sum / n as f64;
        let positions = &self.order[0][start..end];
        let mut best: Option<Split> = None;
        for (f, vals) in self.vals.iter().enumerate() {
            let (lo, hi) = positions
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| {
                    let v = vals[p as usize];
                    (lo.min(v), hi.max(v))
                });
            if hi <= lo {
                continue;
            }
            let threshold = rng.gen_range(lo..hi);
            let (mut sl, mut nl) = (0.0, 0usize);
            for &p in positions {
                if vals[p as usize] <= threshold {
                    sl += self.targets[p as usize];
                    nl += 1;
                }
            }
            let nr = n - nl;
            if nl < leaf_min || nr < leaf_min {
                continue;
            }
            let sr = sum - sl;
            let gain = sl * sl / nl as f64 + sr * sr / nr as f64 - base;
            if best.as_ref().is_none_or(|s| gain > s.gain) {
                best = Some(Split {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
        best
    }

    /// Stable-partitions every maintained order list; returns the split point.
    fn partition(&mut self, start: usize, end: usize, split: &Split) -> usize {
        let vals = &self.vals[split.feature];
        let mut nl = 0;
        for &p in &self.order[0][start..end] {
            let left = vals[p as usize] <= split.threshold;
            self.goes_left[p as usize] = left;
            nl += usize::from(left);
        }
        for list in &mut self.order {
            let (mut l, mut r) = (start, start + nl);
            for &p in &list[start..end] {
                if self.goes_left[p as usize] {
                    self.buf[l] = p;
                    l += 1;
                } else {
                    self.buf[r] = p;
                    r += 1;
                }
            }
            list[start..end].copy_from_slice(&self.buf[start..end]);
        }
        start + nl
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::tests::noisy_data;
    use rand::SeedableRng;

    const DEEP: TreeParams = TreeParams {
        max_depth: 30,
        min_samples_leaf: 1,
    };

    #[test]
    fn step_function_single_split() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 0.0]).collect();
        let y: Vec<f64> = (0..10).map(|i| if i < 4 { 1.0 } else { 5.0 }).collect();
        let t = RegressionTree::fit_best(&x, &y, &DEEP);
        assert_eq!(t.node_count(), 3);
        assert_eq!(t.feature[0], 0);
        assert_eq!(t.value[0], 3.5);
        assert_eq!(t.predict_row(&[2.0, 0.0]), 1.0);
        assert_eq!(t.predict_row(&[7.0, 0.0]), 5.0);
        assert_eq!(t.importance[1], 0.0);
        // SSE drop: 10 * var = 10 * 0.24 * 16
        assert!((t.importance[0] - 38.4).abs() < 1e-9);
    }

    #[test]
    fn deep_tree_interpolates_distinct_points() {
        let (x, y) = noisy_data(64, 1);
        let t = RegressionTree::fit_best(&x, &y, &DEEP);
        for (r, v) in x.iter().zip(&y) {
            assert_eq!(t.predict_row(r), *v);
        }
    }

    #[test]
    fn respects_depth_and_leaf_size() {
        let (x, y) = noisy_data(200, 2);
        let params = TreeParams {
            max_depth: 3,
            min_samples_leaf: 20,
        };
        let t = RegressionTree::fit_best(&x, &y, &params);
        assert!(t.depth() <= 3);
        for i in 0..t.node_count() {
            if t.feature[i] < 0 {
                let n = x.iter().filter(|r| leaf_of(&t, r) == i).count();
                assert!(n >= 20, "leaf {i} has {n} samples");
            }
        }
    }

    fn leaf_of(t: &RegressionTree, x: &[f64]) -> usize {
        let mut i = 0;
        while t.feature[i] >= 0 {
            i = if x[t.feature[i] as usize] <= t.value[i] {
                t.left[i] as usize
            } else {
                t.right[i] as usize
            };
        }
        i
    }

    #[test]
    fn constant_target_has_no_splits() {
        let (x, _) = noisy_data(30, 3);
        let y = vec![2.0; 30];
        let t = RegressionTree::fit_best(&x, &y, &DEEP);
        assert_eq!(t.node_count(), 1);
        assert!(t.importance.iter().all(|v| *v == 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cols = to_columns(&x);
        let rows: Vec<usize> = (0..30).collect();
        let r = grow(&cols, &y, &rows, &DEEP, SplitRule::Random(&mut rng));
        assert_eq!(r.node_count(), 1);
    }

    #[test]
    fn bootstrap_rows_with_repeats() {
        let (x, y) = noisy_data(50, 4);
        let cols = to_columns(&x);
        let rows: Vec<usize> = (0..50).map(|i| (i * 7) % 25).collect();
        let t = grow(&cols, &y, &rows, &DEEP, SplitRule::Best);
        for &r in &rows {
            assert_eq!(t.predict_row(&x[r]), y[r]);
        }
    }
}
