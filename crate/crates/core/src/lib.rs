//! Rice leaf disease detection: a direct pixel pipeline and a feature-analysis
//! pipeline (segmentation, 252 hand-crafted features, dimensionality
//! reduction or feature selection) both ending in an extreme learning machine,
//! plus a stratified cross-validation harness comparing them.

pub mod augment;
pub mod elm;
pub mod dimred;
pub mod error;
pub mod eval;
pub mod features;
pub mod featselect;
pub mod imgcore;
pub mod matrix;
pub mod pipeline;
pub mod preprocess;
pub mod rng;
pub mod segment;

pub use error::{Error, Result};
