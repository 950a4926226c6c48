//! The 252-value feature vector: masked spatial statistics (14), GLCM
//! Haralick features at four orientations (56), GLDM difference statistics at
//! four orientations (56), magnitude-spectrum statistics (14) and Haar
//! sub-band statistics (112).

pub mod dwt;
pub mod fft;
pub mod glcm;
pub mod stats;

use std::ops::Range;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segment::SegmentedImage;
use glcm::{glcm_compute, glcm_features14, gldm_compute, gldm_features14, Glcm, Gldm, Orientation, HARALICK_NAMES};
use stats::{stat14, STAT_NAMES};

pub const N_FEATURES: usize = 252;
pub const TEXTURE: Range<usize> = 0..14;
pub const GLCM: Range<usize> = 14..70;
pub const GLDM: Range<usize> = 70..126;
pub const FFT: Range<usize> = 126..140;
pub const DWT: Range<usize> = 140..252;
pub const SPATIAL: Range<usize> = 0..126;
pub const FREQUENCY: Range<usize> = 126..252;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    /// Gray levels for GLCM/GLDM quantization of `[0, 1]`.
    pub levels: usize,
    pub distance: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            levels: 32,
            distance: 1,
        }
    }
}

/// Canonical names, index-aligned with [`FeatureVector::values`].
pub fn canonical_names() -> &'static [String] {
    static NAMES: OnceLock<Vec<String>> = OnceLock::new();
    NAMES.get_or_init(|| {
        let mut names = Vec::with_capacity(N_FEATURES);
        names.extend(STAT_NAMES.iter().map(|s| format!("tex.{s}")));
        for o in Orientation::ALL {
            names.extend(HARALICK_NAMES.iter().map(|h| format!("glcm.{}.{h}", o.tag())));
        }
        for o in Orientation::ALL {
            names.extend(STAT_NAMES.iter().map(|s| format!("gldm.{}.{s}", o.tag())));
        }
        names.extend(STAT_NAMES.iter().map(|s| format!("fft.{s}")));
        for b in dwt::BAND_NAMES {
            names.extend(STAT_NAMES.iter().map(|s| format!("dwt.{b}.{s}")));
        }
        names
    })
}

/// Named feature groups selectable as experiment inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureSubset {
    Texture,
    Glcm,
    Gldm,
    Fft,
    Dwt,
    All,
    Frequency,
    Spatial,
}

impl FeatureSubset {
    pub fn range(self) -> Range<usize> {
        match self {
            Self::Texture => TEXTURE,
            Self::Glcm => GLCM,
            Self::Gldm => GLDM,
            Self::Fft => FFT,
            Self::Dwt => DWT,
            Self::All => 0..N_FEATURES,
            Self::Frequency => FREQUENCY,
            Self::Spatial => SPATIAL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn names(&self) -> &'static [String] {
        canonical_names()
    }

    pub fn spatial(&self) -> &[f64] {
        &self.values[SPATIAL]
    }

    pub fn frequency(&self) -> &[f64] {
        &self.values[FREQUENCY]
    }
}

/// Feature vector plus flags for substituted degenerate components.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub vector: FeatureVector,
    /// A GLCM or GLDM had no valid masked pair and a uniform stand-in was used.
    pub degenerate_texture: bool,
}

pub fn extract_all(img: &SegmentedImage, cfg: &FeatureConfig) -> Result<Extraction> {
    let mut values = Vec::with_capacity(N_FEATURES);
    let masked: Vec<f64> = img
        .gray
        .data()
        .iter()
        .zip(img.mask.bits())
        .filter(|(_, &m)| m)
        .map(|(&v, _)| v)
        .collect();
    values.extend(stat14(&masked, Some(masked.len()))?.to_array());

    let mut degenerate = false;
    for o in Orientation::ALL {
        let g = match glcm_compute(img, o, cfg.distance, cfg.levels) {
            Ok(g) => g,
            Err(Error::DegenerateMatrix(_)) => {
                degenerate = true;
                Glcm::uniform(cfg.levels, o.offset(cfg.distance))
            }
            Err(e) => return Err(e),
        };
        values.extend(glcm_features14(&g));
    }
    for o in Orientation::ALL {
        let d = match gldm_compute(img, o, cfg.distance, cfg.levels) {
            Ok(d) => d,
            Err(Error::DegenerateMatrix(_)) => {
                degenerate = true;
                Gldm::uniform(cfg.levels, o.offset(cfg.distance))
            }
            Err(e) => return Err(e),
        };
        values.extend(gldm_features14(&d).to_array());
    }
    values.extend(fft::fft_features(img)?.to_array());
    for band in dwt::dwt_features(img)? {
        values.extend(band.to_array());
    }
    debug_assert_eq!(values.len(), N_FEATURES);
    Ok(Extraction {
        vector: FeatureVector { values },
        degenerate_texture: degenerate,
    })
}
