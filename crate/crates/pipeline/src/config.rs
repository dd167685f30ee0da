//! Run configuration, loadable from a single JSON document. Every section
//! has defaults; unknown keys are rejected.

use std::path::{Path, PathBuf};

use kdloc_core::hessian::SpectrumConfig;
use kdloc_core::kd::KdParams;
use kdloc_core::localization::DEFAULT_TAU;
use kdloc_core::metrics::{MiouAggregation, DEFAULT_DECISION_THRESHOLD};
use kdloc_core::net::{AdamConfig, NetworkSpec};
use kdloc_core::synth::SyntheticSpec;
use kdloc_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{self, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// Generate in memory from a spec.
    Synthetic(SyntheticSpec),
    /// A directory written by `gen-data`.
    Path(PathBuf),
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synthetic(SyntheticSpec::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    pub out_side: usize,
    pub crop_side: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self { out_side: 32, crop_side: 32 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub fixed_shuffle: bool,
    pub augment: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            adam: t.adam,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            fixed_shuffle: t.fixed_shuffle,
            augment: t.augment,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MinArea {
    /// Nearest-rank percentile of the train split's ground-truth box areas.
    Percentile(f64),
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalizationConfig {
    pub tau: f64,
    pub min_area: MinArea,
    pub aggregation: MiouAggregation,
    /// Class whose logit drives Grad-CAM.
    pub target_class: usize,
}

impl Default for LocalizationConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            min_area: MinArea::Percentile(0.0),
            aggregation: MiouAggregation::PerImage,
            target_class: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HessianConfig {
    pub spectrum: SpectrumConfig,
    /// Train images in the loss batch (the first ones in split order).
    pub max_samples: usize,
    /// Relative finite-difference step for Hessian-vector products.
    pub eps: f64,
}

impl Default for HessianConfig {
    fn default() -> Self {
        Self { spectrum: SpectrumConfig::default(), max_samples: 128, eps: kdloc_core::hessian::DEFAULT_HVP_EPS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    pub network: NetworkSpec,
    pub preprocess: PreprocessConfig,
    pub training: TrainingConfig,
    pub kd: KdParams,
    pub localization: LocalizationConfig,
    pub decision_threshold: f64,
    pub hessian: HessianConfig,
    /// Root seed for initialization, shuffling and augmentation.
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    /// Add wall-clock durations to run records (makes them non-reproducible).
    pub record_timing: bool,
}

pub const DEFAULT_OUTPUT_DIR: &str = "kdloc-out";

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::default(),
            network: NetworkSpec::small_cnn([1, 32, 32], 4, 8, 2),
            preprocess: PreprocessConfig::default(),
            training: TrainingConfig::default(),
            kd: KdParams::default(),
            localization: LocalizationConfig::default(),
            decision_threshold: DEFAULT_DECISION_THRESHOLD,
            hessian: HessianConfig::default(),
            seed: 42,
            output_dir: None,
            record_timing: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        error::read_json(path)
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.training;
        TrainConfig {
            adam: t.adam,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            seed: self.seed,
            fixed_shuffle: t.fixed_shuffle,
            augment: t.augment,
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        self.kd.validate()?;
        self.network.validate()?;
        match &self.dataset {
            DatasetSource::Synthetic(spec) => spec.validate()?,
            DatasetSource::Path(p) if !p.is_dir() => {
                return Err(Error::invalid(format!("dataset directory {} does not exist", p.display())))
            }
            DatasetSource::Path(_) => {}
        }
        let p = &self.preprocess;
        if p.crop_side == 0 || p.crop_side > p.out_side {
            return Err(Error::invalid("preprocess needs 0 < crop_side <= out_side"));
        }
        let [_, h, w] = self.network.input;
        if h != p.crop_side || w != p.crop_side {
            return Err(Error::invalid(format!(
                "network input {h}x{w} does not match the {0}x{0} crop",
                p.crop_side
            )));
        }
        let loc = &self.localization;
        if !(0.0..=1.0).contains(&loc.tau) {
            return Err(Error::invalid("tau must lie in [0, 1]"));
        }
        match loc.min_area {
            MinArea::Percentile(q) if !(0.0..=100.0).contains(&q) => {
                return Err(Error::invalid("min-area percentile must lie in [0, 100]"))
            }
            MinArea::Fixed(a) if !(a >= 0.0) => return Err(Error::invalid("min_area must be non-negative")),
            _ => {}
        }
        if loc.target_class >= self.network.classes {
            return Err(Error::invalid("Grad-CAM target class out of range"));
        }
        if !(0.0..=1.0).contains(&self.decision_threshold) {
            return Err(Error::invalid("decision threshold must lie in [0, 1]"));
        }
        if self.hessian.max_samples == 0 || !(self.hessian.eps > 0.0) {
            return Err(Error::invalid("hessian needs max_samples >= 1 and eps > 0"));
        }
        Ok(())
    }

    /// Copy stored in run records: the output directory is left out so that
    /// records do not depend on where a run was written.
    pub fn snapshot(&self) -> Self {
        Self { output_dir: None, ..self.clone() }
    }
}
