use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{fix_sign, sorted_eigen};
use crate::error::{arg_err, Error, Result};
use crate::matrix::FeatureMatrix;

/// Eigenvalues of the centered kernel at or below this are discarded.
pub const EIGEN_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Kernel {
    /// `exp(-gamma ||x - y||²)`.
    Rbf { gamma: f64 },
    /// Plain inner product; reproduces linear PCA.
    Linear,
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpcaModel {
    pub kernel: Kernel,
    pub training_rows: Vec<Vec<f64>>,
    /// `k` coefficient vectors over the training rows, each scaled by `1/sqrt(λ)`.
    pub alphas: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    /// Per-training-row kernel means and the grand mean of the training kernel.
    pub kernel_col_means: Vec<f64>,
    pub kernel_mean: f64,
}

/// `1 / (d · mean per-feature variance)` of the training matrix.
pub fn default_gamma(m: &FeatureMatrix) -> f64 {
    let n = m.rows() as f64;
    let mean_var = (0..m.cols())
        .map(|j| {
            let mu = m.column(j).sum::<f64>() / n;
            m.column(j).map(|v| (v - mu) * (v - mu)).sum::<f64>() / n
        })
        .sum::<f64>()
        / m.cols() as f64;
    if mean_var > 0.0 {
        1.0 / (m.cols() as f64 * mean_var)
    } else {
        1.0 / m.cols() as f64
    }
}

pub fn kernel_matrix(rows: &[Vec<f64>], kernel: &Kernel) -> DMatrix<f64> {
    let n = rows.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval(&rows[i], &rows[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Double centering `K - 1K - K1 + 1K1` with `1` the all-`1/n` matrix.
pub fn center_kernel(k: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, f64) {
    let n = k.nrows();
    let col_means: Vec<f64> = (0..n).map(|j| k.column(j).sum() / n as f64).collect();
    let grand = col_means.iter().sum::<f64>() / n as f64;
    let centered = DMatrix::from_fn(n, n, |i, j| k[(i, j)] - col_means[i] - col_means[j] + grand);
    (centered, col_means, grand)
}

/// RBF kernel PCA with `gamma` defaulting to [`default_gamma`].
pub fn kpca_fit(m: &FeatureMatrix, k: usize, gamma: Option<f64>) -> Result<KpcaModel> {
    let kernel = Kernel::Rbf {
        gamma: gamma.unwrap_or_else(|| default_gamma(m)),
    };
    kpca_fit_kernel(m, k, kernel)
}

pub fn kpca_fit_kernel(m: &FeatureMatrix, k: usize, kernel: Kernel) -> Result<KpcaModel> {
    let n = m.rows();
    if k == 0 || n < 2 || k > n - 1 {
        return arg_err(format!("kpca: k = {k} outside 1..={} for {n} rows", n.max(1) - 1));
    }
    let rows: Vec<Vec<f64>> = (0..n).map(|i| m.row(i).to_vec()).collect();
    let (centered, col_means, grand) = center_kernel(&kernel_matrix(&rows, &kernel));
    let pairs = sorted_eigen(centered);
    if pairs.first().map_or(true, |p| p.0 <= EIGEN_FLOOR) {
        return Err(Error::DegenerateKernel(EIGEN_FLOOR));
    }
    let (mut alphas, mut eigenvalues) = (Vec::with_capacity(k), Vec::with_capacity(k));
    for (l, mut v) in pairs.into_iter().take(k) {
        if l > EIGEN_FLOOR {
            fix_sign(&mut v);
            let s = l.sqrt();
            v.iter_mut().for_each(|x| *x /= s);
            eigenvalues.push(l);
        } else {
            // rank-deficient kernel: the remaining components project to zero
            v.iter_mut().for_each(|x| *x = 0.0);
            eigenvalues.push(0.0);
        }
        alphas.push(v);
    }
    Ok(KpcaModel {
        kernel,
        training_rows: rows,
        alphas,
        eigenvalues,
        kernel_col_means: col_means,
        kernel_mean: grand,
    })
}

pub fn kpca_transform(model: &KpcaModel, m: &FeatureMatrix) -> Result<FeatureMatrix> {
    let d = model.training_rows.first().map_or(0, Vec::len);
    if m.cols() != d {
        return arg_err(format!("kpca fitted on {d} columns, got {}", m.cols()));
    }
    let n = model.training_rows.len();
    let k = model.alphas.len();
    let mut out = DMatrix::zeros(m.rows(), k);
    let mut kx = vec![0.0; n];
    for r in 0..m.rows() {
        let x = m.row(r);
        for (i, t) in model.training_rows.iter().enumerate() {
            kx[i] = model.kernel.eval(x, t);
        }
        let row_mean = kx.iter().sum::<f64>() / n as f64;
        for i in 0..n {
            kx[i] = kx[i] - model.kernel_col_means[i] - row_mean + model.kernel_mean;
        }
        for c in 0..k {
            out[(r, c)] = model.alphas[c].iter().zip(&kx).map(|(a, b)| a * b).sum();
        }
    }
    FeatureMatrix::from_dmatrix(&out, "kpca", m.labels.clone(), m.sample_ids.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> FeatureMatrix {
        let v = (0..rows * cols)
            .map(|i| (crate::rng::splitmix64(seed ^ i as u64) % 100_000) as f64 / 50_000.0 - 1.0)
            .collect();
        let names = (0..cols).map(|j| format!("f{j}")).collect();
        FeatureMatrix::new(rows, cols, v, names, vec![0; rows]).unwrap()
    }

    #[test]
    fn rbf_kernel_symmetric_unit_diagonal() {
        let m = random_matrix(12, 4, 1);
        let rows: Vec<Vec<f64>> = (0..12).map(|i| m.row(i).to_vec()).collect();
        let k = kernel_matrix(&rows, &Kernel::Rbf { gamma: default_gamma(&m) });
        for i in 0..12 {
            assert!((k[(i, i)] - 1.0).abs() < 1e-12);
            for j in 0..12 {
                assert!((k[(i, j)] - k[(j, i)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn centered_kernel_is_psd() {
        let m = random_matrix(25, 6, 2);
        let rows: Vec<Vec<f64>> = (0..25).map(|i| m.row(i).to_vec()).collect();
        let (c, _, _) = center_kernel(&kernel_matrix(&rows, &Kernel::Rbf { gamma: 0.3 }));
        assert!(c.symmetric_eigenvalues().iter().all(|&l| l >= -1e-8));
    }

    #[test]
    fn output_width_and_degenerate() {
        let m = random_matrix(20, 5, 3);
        let model = kpca_fit(&m, 7, None).unwrap();
        assert_eq!(kpca_transform(&model, &m).unwrap().cols(), 7);
        assert!(model.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        let names = (0..3).map(|j| format!("f{j}")).collect();
        let same = FeatureMatrix::new(4, 3, vec![1.0; 12], names, vec![0; 4]).unwrap();
        assert!(matches!(kpca_fit(&same, 2, None), Err(Error::DegenerateKernel(_))));
        assert!(kpca_fit(&m, 20, None).is_err());
    }
}
