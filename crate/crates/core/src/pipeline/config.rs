//! TOML pipeline configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::synth::SynthConfig;
use crate::augment::AugmentSpec;
use crate::error::{Error, Result};
use crate::eval::{config_hash, ExperimentConfig};
use crate::features::FeatureConfig;
use crate::preprocess::AheParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Global seed; overrides every nested `seed`.
    pub seed: u64,
    /// Working resolution for segmentation and feature extraction.
    pub image_size: usize,
    /// Input resolution of the direct pixel model (256 reproduces the
    /// 65,536-input network).
    pub dicdm_size: usize,
    pub augment: AugmentSpec,
    pub ahe: AheParams,
    pub features: FeatureConfig,
    pub experiment: ExperimentConfig,
    pub synth: SynthConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            image_size: 256,
            dicdm_size: 64,
            augment: AugmentSpec::default(),
            ahe: AheParams::default(),
            features: FeatureConfig::default(),
            experiment: ExperimentConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        let seed = cfg.seed;
        Ok(cfg.with_seed(seed))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Sets the global seed and every stage seed derived from it.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.augment.seed = seed;
        self.experiment.seed = seed;
        self.experiment.autoencoder.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_size < 8 || self.image_size % 4 != 0 {
            return Err(Error::Config(format!("image_size must be a multiple of 4 and >= 8, got {}", self.image_size)));
        }
        if self.dicdm_size == 0 {
            return Err(Error::Config("dicdm_size must be positive".into()));
        }
        if self.features.levels < 2 || self.features.distance == 0 {
            return Err(Error::Config("features need levels >= 2 and distance >= 1".into()));
        }
        if self.experiment.folds < 2 {
            return Err(Error::Config("experiment.folds must be at least 2".into()));
        }
        self.ahe.validate()?;
        self.augment.validate()
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_roundtrip_and_defaults() {
        let cfg = PipelineConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(PipelineConfig::from_toml(&text).unwrap(), cfg);
        assert_eq!(PipelineConfig::from_toml("").unwrap(), cfg);
        assert_eq!(cfg.experiment.folds, 10);
        assert_eq!(cfg.experiment.iterative.batch, 16);
        assert_eq!(cfg.experiment.iterative.max_epochs, 100);
        assert_eq!(cfg.experiment.iterative.lr, 0.001);
        assert_eq!(cfg.augment.target_per_class, 1000);
    }

    #[test]
    fn seed_propagates_and_errors() {
        let cfg = PipelineConfig::from_toml("seed = 7\nimage_size = 64\n[experiment]\nfolds = 5\n").unwrap();
        assert_eq!((cfg.augment.seed, cfg.experiment.seed, cfg.experiment.autoencoder.seed), (7, 7, 7));
        assert_eq!(cfg.experiment.folds, 5);
        assert!(matches!(PipelineConfig::from_toml("bogus = 1"), Err(Error::Config(_))));
        assert!(PipelineConfig::from_toml("image_size = 30").is_err());
        assert_ne!(cfg.hash(), PipelineConfig::default().hash());
    }
}
