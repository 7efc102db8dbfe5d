//! Experiment description read from JSON. Unknown keys are rejected at
//! every level.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::NetworkSpec;
use crate::synth::SynthConfig;
use crate::train::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub train: SynthConfig,
    pub test: SynthConfig,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            train: SynthConfig::toy_train(500, 0),
            test: SynthConfig::toy_test(500, 1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Sub-region side for per-bin errors.
    pub region_px: usize,
    /// Largest integer bin centre in the per-bin table.
    pub max_bin: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            region_px: 64,
            max_bin: 30,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Free-form label.
    pub name: Option<String>,
    pub synth: SynthSection,
    pub train: TrainConfig,
    /// Network override; derived from the variant and partition when absent.
    pub network: Option<NetworkSpec>,
    pub eval: EvalSection,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Master seed: training uses it, the synthetic splits use it and `seed + 1`.
    pub seed: Option<u64>,
}

/// The synthetic closed-to-open experiment.
pub const TOY_JSON: &str = include_str!("../configs/toy.json");

impl RunConfig {
    pub fn toy() -> Self {
        Self::from_json(TOY_JSON, Path::new("configs/toy.json")).expect("bundled toy config parses")
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::json(origin, e))?;
        Ok(cfg.seeded())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Applies `seed`, if set, to every stochastic component.
    pub fn seeded(mut self) -> Self {
        if let Some(s) = self.seed {
            self.train.seed = s;
            self.synth.train.seed = s;
            self.synth.test.seed = s.wrapping_add(1);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.train.validate()?;
        self.synth.test.validate()?;
        self.train.validate()?;
        if let Some(n) = &self.network {
            n.validate()?;
        }
        if self.eval.region_px == 0 || !self.eval.region_px.is_power_of_two() {
            return Err(Error::Config(format!(
                "eval.region_px {} must be a power of two",
                self.eval.region_px
            )));
        }
        Ok(())
    }
}
