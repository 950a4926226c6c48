//! Dimensionality reduction: PCA, kernel PCA and sigmoid autoencoders.

pub mod autoencoder;
pub mod kpca;
pub mod pca;

pub use crate::matrix::{standardize_fit_apply, FeatureMatrix, Standardizer};
pub use autoencoder::{ae_encode, sparse_ae_fit, stacked_ae_fit, AeTrainConfig, AutoencoderModel, Sparsity};
pub use kpca::{kpca_fit, kpca_transform, Kernel, KpcaModel};
pub use pca::{pca_fit, pca_transform, PcaModel};

/// Default output widths.
pub const PCA_COMPONENTS: usize = 70;
pub const KPCA_COMPONENTS: usize = 65;
pub const SPARSE_AE_BOTTLENECK: usize = 60;
pub const STACKED_AE_BOTTLENECK: usize = 126;

/// Flips `v` so that its largest-magnitude entry (first on ties) is positive.
pub(crate) fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Eigenpairs of a symmetric matrix sorted by eigenvalue, largest first
/// (stable on ties).
pub(crate) fn sorted_eigen(m: nalgebra::DMatrix<f64>) -> Vec<(f64, Vec<f64>)> {
    let eig = m.symmetric_eigen();
    let mut pairs: Vec<(f64, Vec<f64>)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &l)| (l, eig.eigenvectors.column(i).iter().copied().collect()))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs
}
