//! Random-forest mean-decrease-in-impurity importances.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};
use crate::matrix::FeatureMatrix;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Candidate features per split; `None` means `floor(sqrt(d))`.
    pub max_features: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            trees: 100,
            max_depth: 12,
            min_leaf: 2,
            max_features: None,
        }
    }
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

struct TreeBuilder<'a> {
    m: &'a FeatureMatrix,
    n_classes: usize,
    mtry: usize,
    cfg: &'a ForestConfig,
    importance: Vec<f64>,
    root_size: f64,
}

impl TreeBuilder<'_> {
    fn grow(&mut self, idx: &mut [usize], depth: usize, r: &mut rng::StreamRng) {
        let n = idx.len();
        let mut counts = vec![0usize; self.n_classes];
        for &i in idx.iter() {
            counts[self.m.labels[i]] += 1;
        }
        let parent = gini(&counts, n);
        if depth >= self.cfg.max_depth || n < 2 * self.cfg.min_leaf || parent == 0.0 {
            return;
        }
        let d = self.m.cols();
        let candidates = sample(r, d, self.mtry.min(d));
        // (decrease, feature, split position in sorted order, threshold)
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(n);
        for f in candidates.iter() {
            sorted.clear();
            sorted.extend(idx.iter().map(|&i| (self.m.get(i, f), self.m.labels[i])));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = vec![0usize; self.n_classes];
            let mut right = counts.clone();
            for pos in 1..n {
                let c = sorted[pos - 1].1;
                left[c] += 1;
                right[c] -= 1;
                if sorted[pos].0 == sorted[pos - 1].0 || pos < self.cfg.min_leaf || n - pos < self.cfg.min_leaf {
                    continue;
                }
                let dec = n as f64 * parent - pos as f64 * gini(&left, pos) - (n - pos) as f64 * gini(&right, n - pos);
                if best.map_or(true, |b| dec > b.0) {
                    best = Some((dec, f, (sorted[pos - 1].0 + sorted[pos].0) / 2.0));
                }
            }
        }
        let Some((dec, f, thr)) = best else { return };
        if dec <= 1e-12 {
            return;
        }
        self.importance[f] += dec / self.root_size;
        let mut split = 0;
        for k in 0..n {
            if self.m.get(idx[k], f) <= thr {
                idx.swap(k, split);
                split += 1;
            }
        }
        let (l, rt) = idx.split_at_mut(split);
        self.grow(l, depth + 1, r);
        self.grow(rt, depth + 1, r);
    }
}

/// Normalized MDI importances of a `trees`-tree Gini forest. Tree `t` draws
/// its bootstrap and split candidates from the stream `(seed, t)`.
pub fn rf_importance(m: &FeatureMatrix, cfg: &ForestConfig, seed: u64) -> Result<Vec<f64>> {
    if m.rows() < 10 {
        return arg_err(format!("random forest needs at least 10 rows, got {}", m.rows()));
    }
    if cfg.trees == 0 {
        return arg_err("random forest needs at least one tree");
    }
    let d = m.cols();
    let n_classes = m.n_classes();
    let distinct = m.labels.iter().collect::<std::collections::BTreeSet<_>>().len();
    if distinct < 2 {
        log::warn!("random forest importance on single-class data: all importances are zero");
        return Ok(vec![0.0; d]);
    }
    let mtry = cfg.max_features.unwrap_or(((d as f64).sqrt().floor() as usize).max(1));
    let per_tree: Vec<Vec<f64>> = (0..cfg.trees)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(seed, &[0xf0e, t as u64]);
            let n = m.rows();
            let mut idx: Vec<usize> = (0..n).map(|_| r.gen_range(0..n)).collect();
            let mut b = TreeBuilder {
                m,
                n_classes,
                mtry,
                cfg,
                importance: vec![0.0; d],
                root_size: n as f64,
            };
            b.grow(&mut idx, 0, &mut r);
            b.importance
        })
        .collect();
    let mut imp = vec![0.0; d];
    for t in &per_tree {
        for (a, b) in imp.iter_mut().zip(t) {
            *a += b;
        }
    }
    let total: f64 = imp.iter().sum();
    if total > 0.0 {
        imp.iter_mut().for_each(|v| *v /= total);
    }
    Ok(imp)
}
