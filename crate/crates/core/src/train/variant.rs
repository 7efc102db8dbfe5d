use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::IntervalPartition;

/// Which head and which losses a model uses.
///
/// Regression variants replace the classifier's last layer with a single
/// output trained with an absolute-error loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelVariant {
    Sdcnet { stages: usize },
    /// Level-0 interval classification, no division.
    Classification,
    /// Level-0 count regression, no division.
    Regression,
    RegressionSdcOpen { stages: usize },
    /// Regression with S-DC whose outputs and targets are clipped to `c_max`.
    RegressionSdcClosed { stages: usize, c_max: f64 },
}

pub const VARIANT_NAMES: [&str; 5] = [
    "sdcnet",
    "classification",
    "regression",
    "regression_sdc_open",
    "regression_sdc_closed",
];

impl ModelVariant {
    /// Builds a variant from its command-line name. `c_max` is only used by
    /// the closed regression variant.
    pub fn from_name(name: &str, stages: usize, c_max: f64) -> Result<Self> {
        Ok(match name {
            "sdcnet" => ModelVariant::Sdcnet { stages },
            "classification" => ModelVariant::Classification,
            "regression" => ModelVariant::Regression,
            "regression_sdc_open" => ModelVariant::RegressionSdcOpen { stages },
            "regression_sdc_closed" => ModelVariant::RegressionSdcClosed { stages, c_max },
            other => {
                return Err(Error::Config(format!(
                    "unknown variant {other:?}; expected one of {}",
                    VARIANT_NAMES.join(", ")
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelVariant::Sdcnet { .. } => "sdcnet",
            ModelVariant::Classification => "classification",
            ModelVariant::Regression => "regression",
            ModelVariant::RegressionSdcOpen { .. } => "regression_sdc_open",
            ModelVariant::RegressionSdcClosed { .. } => "regression_sdc_closed",
        }
    }

    pub fn stages(&self) -> usize {
        match *self {
            ModelVariant::Sdcnet { stages }
            | ModelVariant::RegressionSdcOpen { stages }
            | ModelVariant::RegressionSdcClosed { stages, .. } => stages,
            ModelVariant::Classification | ModelVariant::Regression => 0,
        }
    }

    pub fn is_regression(&self) -> bool {
        matches!(
            self,
            ModelVariant::Regression
                | ModelVariant::RegressionSdcOpen { .. }
                | ModelVariant::RegressionSdcClosed { .. }
        )
    }

    /// Upper clip for regression outputs.
    pub fn clip(&self) -> Option<f64> {
        match *self {
            ModelVariant::RegressionSdcClosed { c_max, .. } => Some(c_max),
            _ => None,
        }
    }

    pub fn head_outputs(&self, p: &IntervalPartition) -> usize {
        if self.is_regression() {
            1
        } else {
            p.num_classes()
        }
    }
}
