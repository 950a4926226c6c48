//! Dataset ingestion, synthetic data, configuration, persistence and the
//! image-to-matrix stage shared by the CLI and the experiment harness.

pub mod config;
pub mod dataset;
pub mod persist;
pub mod synth;

use rayon::prelude::*;

pub use config::PipelineConfig;
pub use dataset::{ingest, DatasetManifest};
pub use synth::{synth_generate, SynthConfig};

use crate::error::Result;
use crate::eval::ExperimentData;
use crate::features::{canonical_names, extract_all, N_FEATURES};
use crate::imgcore::{decode_image, resize_bilinear, ImageRgb};
use crate::matrix::FeatureMatrix;
use crate::segment::{segment_leaf, SegmentedImage};

/// Feature and pixel matrices of a dataset, rows in manifest order.
#[derive(Debug, Clone)]
pub struct ProcessedDataset {
    pub features: FeatureMatrix,
    /// Segmented grayscale at `dicdm_size`, zero outside the mask.
    pub pixels: Option<FeatureMatrix>,
    pub class_names: Vec<String>,
    pub segmentation_fallbacks: Vec<String>,
    pub degenerate_texture: Vec<String>,
    pub dicdm_size: usize,
}

impl ProcessedDataset {
    pub fn experiment_data(self) -> ExperimentData {
        ExperimentData {
            pixel_size: format!("{0}x{0}", self.dicdm_size),
            features: self.features,
            pixels: self.pixels,
            class_names: self.class_names,
        }
    }
}

/// Resizes to a square working resolution when needed.
pub fn load_working(path: &std::path::Path, size: usize) -> Result<ImageRgb> {
    let img = decode_image(path)?;
    if img.width() == size && img.height() == size {
        Ok(img)
    } else {
        resize_bilinear(&img, size, size)
    }
}

fn masked_pixels(seg: &SegmentedImage) -> Vec<f64> {
    seg.gray.data().iter().zip(seg.mask.bits()).map(|(&v, &m)| if m { v } else { 0.0 }).collect()
}

struct Sample {
    features: Vec<f64>,
    pixels: Option<Vec<f64>>,
    fallback: bool,
    degenerate: bool,
}

/// Decodes, segments and featurizes every sample in parallel.
pub fn process_dataset(manifest: &DatasetManifest, cfg: &PipelineConfig, with_pixels: bool) -> Result<ProcessedDataset> {
    cfg.validate()?;
    let entries = manifest.entries();
    let samples: Vec<Sample> = entries
        .par_iter()
        .map(|&(_, path)| {
            let img = load_working(path, cfg.image_size)?;
            let seg = segment_leaf(&img, &cfg.ahe)?;
            let ex = extract_all(&seg, &cfg.features)?;
            let pixels = if !with_pixels {
                None
            } else if cfg.dicdm_size == cfg.image_size {
                Some(masked_pixels(&seg))
            } else {
                let small = resize_bilinear(&img, cfg.dicdm_size, cfg.dicdm_size)?;
                Some(masked_pixels(&segment_leaf(&small, &cfg.ahe)?))
            };
            Ok(Sample {
                features: ex.vector.values,
                pixels,
                fallback: seg.fallback,
                degenerate: ex.degenerate_texture,
            })
        })
        .collect::<Result<_>>()?;

    let ids: Vec<String> = entries.iter().map(|&(l, p)| manifest.sample_id(l, p)).collect();
    let labels: Vec<usize> = entries.iter().map(|e| e.0).collect();
    let flagged = |f: fn(&Sample) -> bool| samples.iter().zip(&ids).filter(|(s, _)| f(s)).map(|(_, id)| id.clone()).collect::<Vec<_>>();
    let segmentation_fallbacks = flagged(|s| s.fallback);
    let degenerate_texture = flagged(|s| s.degenerate);
    let n = samples.len();
    let pixels = if with_pixels {
        let d = cfg.dicdm_size * cfg.dicdm_size;
        let values: Vec<f64> = samples.iter().flat_map(|s| s.pixels.clone().unwrap_or_default()).collect();
        let names = (0..d).map(|j| format!("px.{j}")).collect();
        Some(FeatureMatrix::new(n, d, values, names, labels.clone())?.with_sample_ids(ids.clone())?)
    } else {
        None
    };
    let values: Vec<f64> = samples.into_iter().flat_map(|s| s.features).collect();
    let features = FeatureMatrix::new(n, N_FEATURES, values, canonical_names().to_vec(), labels)?.with_sample_ids(ids)?;
    Ok(ProcessedDataset {
        features,
        pixels,
        class_names: manifest.classes.clone(),
        segmentation_fallbacks,
        degenerate_texture,
        dicdm_size: cfg.dicdm_size,
    })
}
