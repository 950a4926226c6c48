//! Stratified k-fold partitioning.

use rand::seq::SliceRandom;

use crate::error::{arg_err, Result};
use crate::rng;

/// Splits sample indices into `k` disjoint test folds. Each class is shuffled
/// with its own stream and dealt round-robin, continuing the fold offset
/// from the previous class so fold sizes stay within one of each other.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return arg_err(format!("need at least 2 folds, got {k}"));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut folds = vec![Vec::new(); k];
    let mut offset = 0;
    for (c, members) in by_class.iter_mut().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < k {
            return arg_err(format!("class {c} has {} samples, fewer than {k} folds", members.len()));
        }
        members.shuffle(&mut rng::stream(seed, &[0xcf, c as u64]));
        for (j, &i) in members.iter().enumerate() {
            folds[(offset + j) % k].push(i);
        }
        offset = (offset + members.len()) % k;
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Training indices complementary to fold `f`.
pub fn train_indices(folds: &[Vec<usize>], f: usize) -> Vec<usize> {
    let mut t: Vec<usize> = folds.iter().enumerate().filter(|(j, _)| *j != f).flat_map(|(_, v)| v.iter().copied()).collect();
    t.sort_unstable();
    t
}
