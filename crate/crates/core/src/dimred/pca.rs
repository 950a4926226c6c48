use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{fix_sign, sorted_eigen};
use crate::error::{arg_err, Result};
use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k` orthonormal rows of length `d`.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
}

/// Top-`k` eigenvectors of the sample covariance `XcᵀXc / (n - 1)`.
pub fn pca_fit(m: &FeatureMatrix, k: usize) -> Result<PcaModel> {
    let (n, d) = (m.rows(), m.cols());
    if n < 2 || k == 0 || k > (n - 1).min(d) {
        return arg_err(format!("pca: k = {k} outside 1..={} for {n}x{d} data", (n.max(1) - 1).min(d)));
    }
    let x = m.to_dmatrix();
    let mean: Vec<f64> = x.column_iter().map(|c| c.sum() / n as f64).collect();
    let xc = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
    let cov = (xc.transpose() * &xc) / (n as f64 - 1.0);
    let pairs = sorted_eigen(cov);
    let (mut components, mut eigenvalues) = (Vec::with_capacity(k), Vec::with_capacity(k));
    for (l, mut v) in pairs.into_iter().take(k) {
        fix_sign(&mut v);
        components.push(v);
        eigenvalues.push(l);
    }
    Ok(PcaModel {
        mean,
        components,
        eigenvalues,
    })
}

/// `(x - mean) · Wᵀ` for every row.
pub fn pca_transform(model: &PcaModel, m: &FeatureMatrix) -> Result<FeatureMatrix> {
    let d = model.mean.len();
    if m.cols() != d {
        return arg_err(format!("pca fitted on {d} columns, got {}", m.cols()));
    }
    let k = model.components.len();
    let out = DMatrix::from_fn(m.rows(), k, |i, c| {
        let row = m.row(i);
        model.components[c]
            .iter()
            .zip(row.iter().zip(&model.mean))
            .map(|(w, (x, mu))| w * (x - mu))
            .sum()
    });
    FeatureMatrix::from_dmatrix(&out, "pca", m.labels.clone(), m.sample_ids.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: usize, cols: usize, v: Vec<f64>) -> FeatureMatrix {
        let names = (0..cols).map(|j| format!("f{j}")).collect();
        FeatureMatrix::new(rows, cols, v, names, vec![0; rows]).unwrap()
    }

    #[test]
    fn rank_one_line() {
        let pts: Vec<f64> = (0..10).flat_map(|t| [t as f64, 2.0 * t as f64 + 1.0]).collect();
        let model = pca_fit(&mat(10, 2, pts), 2).unwrap();
        assert!(model.eigenvalues[1].abs() < 1e-10);
        let dir = [1.0 / 5f64.sqrt(), 2.0 / 5f64.sqrt()];
        let c = &model.components[0];
        assert!((c[0] - dir[0]).abs() < 1e-10 && (c[1] - dir[1]).abs() < 1e-10);
    }

    #[test]
    fn k_out_of_range() {
        let m = mat(3, 4, vec![1.0; 12]);
        assert!(pca_fit(&m, 3).is_err());
        assert!(pca_fit(&m, 0).is_err());
    }

    #[test]
    fn projections_uncorrelated_and_variance_preserved() {
        let v: Vec<f64> = (0..30 * 5)
            .map(|i| ((crate::rng::splitmix64(i as u64) % 10_000) as f64 / 10_000.0) * (1 + i % 5) as f64)
            .collect();
        let m = mat(30, 5, v);
        let model = pca_fit(&m, 3).unwrap();
        let t = pca_transform(&model, &m).unwrap();
        let n = 30.0;
        for a in 0..3 {
            for b in 0..3 {
                let cov: f64 = t.column(a).zip(t.column(b)).map(|(x, y)| x * y).sum::<f64>() / (n - 1.0);
                if a == b {
                    assert!((cov - model.eigenvalues[a]).abs() < 1e-8);
                } else {
                    assert!(cov.abs() < 1e-6);
                }
                let dot: f64 = model.components[a].iter().zip(&model.components[b]).map(|(x, y)| x * y).sum();
                assert!((dot - f64::from(u8::from(a == b))).abs() < 1e-8);
            }
        }
        assert!(model.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }
}
