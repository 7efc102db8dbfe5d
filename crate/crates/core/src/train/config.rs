use serde::{Deserialize, Serialize};

use super::variant::ModelVariant;
use crate::density::KernelSpec;
use crate::error::{Error, Result};
use crate::net::InitScheme;
use crate::partition::PartitionConfig;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub variant: ModelVariant,
    pub partition: PartitionConfig,
    /// Kernel that turns annotations into ground-truth density.
    pub kernel: KernelSpec,
    pub lr0: f64,
    pub plateau_factor: f64,
    /// Epochs without an epoch-mean loss improvement before decaying.
    pub plateau_patience: usize,
    /// Heavy-ball momentum; 0 is plain SGD.
    pub momentum: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Optional cap on SGD steps across all epochs.
    pub max_iterations: Option<usize>,
    pub seed: u64,
    /// Random square training crop; `None` trains on whole (padded) images.
    pub crop_px: Option<usize>,
    /// Crop offsets are multiples of this.
    pub crop_align_px: usize,
    pub hflip: bool,
    pub precision: Precision,
    pub init: InitScheme,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: ModelVariant::Sdcnet { stages: 2 },
            partition: PartitionConfig::OneLinear { step: 0.5, c_max: 10.0 },
            kernel: KernelSpec::Fixed { sigma: 2.0 },
            lr0: 0.001,
            plateau_factor: 0.1,
            plateau_patience: 10,
            momentum: 0.0,
            batch_size: 1,
            max_epochs: 100,
            max_iterations: None,
            seed: 0,
            crop_px: Some(128),
            crop_align_px: 64,
            hflip: true,
            precision: Precision::F64,
            init: InitScheme::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lr0 > 0.0) {
            return bad(format!("lr0 must be positive, got {}", self.lr0));
        }
        if self.plateau_patience == 0 {
            return bad("plateau_patience must be at least 1".into());
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor <= 1.0) {
            return bad(format!("plateau_factor {} outside (0, 1]", self.plateau_factor));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum {} outside [0, 1)", self.momentum));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if let Some(c) = self.crop_px {
            if c == 0 || c % 64 != 0 {
                return bad(format!("crop_px {c} must be a positive multiple of 64"));
            }
        }
        if self.crop_align_px == 0 {
            return bad("crop_align_px must be at least 1".into());
        }
        self.kernel.validate()?;
        self.partition.build()?;
        Ok(())
    }
}
