//! Filter-style feature selection: ANOVA F, χ² and random-forest importance.

pub mod forest;

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};
use crate::matrix::FeatureMatrix;
pub use forest::{rf_importance, ForestConfig};

/// Default selection sizes.
pub const ANOVA_K: usize = 50;
pub const CHI_SQUARE_K: usize = 40;
pub const RF_K: usize = 35;

/// Scores of features with zero within-class variance but nonzero
/// between-class variance.
pub const F_SCORE_CAP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectMethod {
    AnovaF,
    ChiSquare,
    RandomForest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorModel {
    pub method: SelectMethod,
    pub scores: Vec<f64>,
    /// Ascending indices of the `k` best scores.
    pub selected: Vec<usize>,
    pub k: usize,
    /// Column names the scores were computed on.
    pub names: Vec<String>,
}

impl SelectorModel {
    pub fn from_scores(method: SelectMethod, scores: Vec<f64>, k: usize, names: Vec<String>) -> Result<Self> {
        if k == 0 || k > scores.len() {
            return arg_err(format!("cannot select {k} of {} features", scores.len()));
        }
        Ok(Self {
            method,
            selected: top_k(&scores, k),
            scores,
            k,
            names,
        })
    }
}

/// Indices of the `k` largest scores (ties to the lower index), ascending.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut sel: Vec<usize> = order.into_iter().take(k).collect();
    sel.sort_unstable();
    sel
}

fn class_groups(m: &FeatureMatrix) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); m.n_classes()];
    for (i, &l) in m.labels.iter().enumerate() {
        groups[l].push(i);
    }
    groups.retain(|g| !g.is_empty());
    groups
}

/// One-way ANOVA `F = MS_between / MS_within` per feature.
pub fn anova_f_scores(m: &FeatureMatrix) -> Result<Vec<f64>> {
    let groups = class_groups(m);
    if groups.len() < 2 {
        return arg_err("ANOVA needs at least 2 classes");
    }
    if let Some(g) = groups.iter().find(|g| g.len() < 2) {
        return arg_err(format!("ANOVA needs >= 2 samples per class, class of sample {} has {}", g[0], g.len()));
    }
    let n = m.rows() as f64;
    let k = groups.len() as f64;
    Ok((0..m.cols())
        .map(|j| {
            let grand = m.column(j).sum::<f64>() / n;
            let (mut ssb, mut ssw) = (0.0, 0.0);
            for g in &groups {
                let mean = g.iter().map(|&i| m.get(i, j)).sum::<f64>() / g.len() as f64;
                ssb += g.len() as f64 * (mean - grand).powi(2);
                ssw += g.iter().map(|&i| (m.get(i, j) - mean).powi(2)).sum::<f64>();
            }
            let msb = ssb / (k - 1.0);
            let msw = ssw / (n - k);
            if msw > 0.0 {
                (msb / msw).min(F_SCORE_CAP)
            } else if msb > 0.0 {
                F_SCORE_CAP
            } else {
                0.0
            }
        })
        .collect())
}

/// χ² of per-class feature sums against class-proportional expectations,
/// after min-max rescaling each feature to `[0, 1]`.
pub fn chi_square_scores(m: &FeatureMatrix) -> Result<Vec<f64>> {
    let groups = class_groups(m);
    let n = m.rows() as f64;
    Ok((0..m.cols())
        .map(|j| {
            let lo = m.column(j).fold(f64::INFINITY, f64::min);
            let hi = m.column(j).fold(f64::NEG_INFINITY, f64::max);
            if !(hi > lo) {
                return 0.0;
            }
            let scaled = |i: usize| (m.get(i, j) - lo) / (hi - lo);
            let total: f64 = (0..m.rows()).map(scaled).sum();
            groups
                .iter()
                .map(|g| {
                    let observed: f64 = g.iter().map(|&i| scaled(i)).sum();
                    let expected = g.len() as f64 / n * total;
                    if expected > 0.0 {
                        (observed - expected).powi(2) / expected
                    } else {
                        0.0
                    }
                })
                .sum()
        })
        .collect())
}

pub fn fit_selector(m: &FeatureMatrix, method: SelectMethod, k: usize, forest: &ForestConfig, seed: u64) -> Result<SelectorModel> {
    let scores = match method {
        SelectMethod::AnovaF => anova_f_scores(m)?,
        SelectMethod::ChiSquare => chi_square_scores(m)?,
        SelectMethod::RandomForest => rf_importance(m, forest, seed)?,
    };
    SelectorModel::from_scores(method, scores, k, m.names.clone())
}

/// Keeps the selected columns in ascending index order. Applying a model to a
/// matrix it already reduced returns that matrix unchanged.
pub fn select(m: &FeatureMatrix, model: &SelectorModel) -> Result<FeatureMatrix> {
    if m.names == model.names {
        return Ok(m.select_cols(&model.selected));
    }
    let reduced: Vec<&String> = model.selected.iter().map(|&j| &model.names[j]).collect();
    if m.names.iter().collect::<Vec<_>>() == reduced {
        return Ok(m.clone());
    }
    arg_err(format!(
        "selector fitted on a {}-feature dictionary does not match this {}-column matrix",
        model.names.len(),
        m.cols()
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mat(rows: usize, cols: usize, v: Vec<f64>, labels: Vec<usize>) -> FeatureMatrix {
        let names = (0..cols).map(|j| format!("f{j}")).collect();
        FeatureMatrix::new(rows, cols, v, names, labels).unwrap()
    }

    #[test]
    fn anova_hand_case() {
        let m = mat(4, 1, vec![1.0, 2.0, 3.0, 4.0], vec![0, 0, 1, 1]);
        assert!((anova_f_scores(&m).unwrap()[0] - 8.0).abs() < 1e-12);
        let same = mat(4, 1, vec![1.0, 3.0, 1.0, 3.0], vec![0, 0, 1, 1]);
        assert!(anova_f_scores(&same).unwrap()[0].abs() < 1e-12);
        let cap = mat(4, 1, vec![1.0, 1.0, 3.0, 3.0], vec![0, 0, 1, 1]);
        assert_eq!(anova_f_scores(&cap).unwrap()[0], F_SCORE_CAP);
        let small = mat(3, 1, vec![1.0, 2.0, 3.0], vec![0, 0, 1]);
        assert!(anova_f_scores(&small).is_err());
    }

    #[test]
    fn chi_square_hand_case() {
        let m = mat(4, 2, vec![1.0, 7.0, 1.0, 7.0, 0.0, 7.0, 0.0, 7.0], vec![0, 0, 1, 1]);
        let s = chi_square_scores(&m).unwrap();
        assert!((s[0] - 2.0).abs() < 1e-12);
        assert_eq!(s[1], 0.0);
    }

    #[test]
    fn selection_projection() {
        let m = mat(2, 6, (0..12).map(f64::from).collect(), vec![0, 1]);
        let model = SelectorModel::from_scores(SelectMethod::AnovaF, vec![9.0, 1.0, 1.0, 1.0, 1.0, 5.0], 2, m.names.clone()).unwrap();
        assert_eq!(model.selected, vec![0, 5]);
        let s = select(&m, &model).unwrap();
        assert_eq!(s.names, vec!["f0", "f5"]);
        assert_eq!(s.row(1), &[6.0, 11.0]);
        assert_eq!(select(&s, &model).unwrap(), s);
        let full = SelectorModel::from_scores(SelectMethod::AnovaF, vec![1.0; 6], 6, m.names.clone()).unwrap();
        assert_eq!(select(&m, &full).unwrap().values(), m.values());
        let other = mat(2, 3, vec![0.0; 6], vec![0, 1]);
        assert!(select(&other, &model).is_err());
    }

    #[test]
    fn top_k_ties_prefer_lower_index() {
        assert_eq!(top_k(&[1.0, 3.0, 3.0, 3.0, 0.0], 2), vec![1, 2]);
    }

    #[test]
    fn rf_normalized_and_reproducible() {
        let mut v = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let c = i % 2;
            v.extend([c as f64 + 0.1 * (i % 5) as f64, ((i * 7) % 11) as f64, ((i * 3) % 13) as f64]);
            labels.push(c);
        }
        let m = mat(40, 3, v, labels);
        let a = rf_importance(&m, &ForestConfig::default(), 5).unwrap();
        let b = rf_importance(&m, &ForestConfig::default(), 5).unwrap();
        assert_eq!(a, b);
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(a[0] > a[1] && a[0] > a[2]);
        let single = mat(10, 1, vec![1.0; 10], vec![0; 10]);
        assert_eq!(rf_importance(&single, &ForestConfig::default(), 0).unwrap(), vec![0.0]);
        assert!(rf_importance(&mat(5, 1, vec![0.0; 5], vec![0, 1, 0, 1, 0]), &ForestConfig::default(), 0).is_err());
    }

    proptest! {
        #[test]
        fn scores_permutation_equivariant(v in proptest::collection::vec(-10.0f64..10.0, 24), shift in 1usize..4) {
            let labels = vec![0, 0, 0, 1, 1, 1];
            let m = mat(6, 4, v, labels);
            let perm: Vec<usize> = (0..4).map(|j| (j + shift) % 4).collect();
            let p = m.select_cols(&perm);
            let (fa, fp) = (anova_f_scores(&m).unwrap(), anova_f_scores(&p).unwrap());
            let (ca, cp) = (chi_square_scores(&m).unwrap(), chi_square_scores(&p).unwrap());
            for (j, &src) in perm.iter().enumerate() {
                prop_assert_eq!(fp[j], fa[src]);
                prop_assert_eq!(cp[j], ca[src]);
            }
        }

        #[test]
        fn duplication_preserves_ranking(v in proptest::collection::vec(-10.0f64..10.0, 30)) {
            let labels = vec![0, 0, 1, 1, 2, 2];
            let m = mat(6, 5, v, labels);
            let dup = m.select_rows(&(0..12).map(|i| i % 6).collect::<Vec<_>>());
            for f in [anova_f_scores, chi_square_scores] {
                let (a, b) = (f(&m).unwrap(), f(&dup).unwrap());
                // duplication scales every score by one common factor
                let ratios: Vec<f64> = a.iter().zip(&b).filter(|(x, _)| **x > 1e-9 && **x < F_SCORE_CAP).map(|(x, y)| y / x).collect();
                for r in &ratios {
                    prop_assert!((r - ratios[0]).abs() < 1e-9 * ratios[0]);
                }
                prop_assert_eq!(top_k(&a, 3), top_k(&b, 3));
            }
        }
    }
}
