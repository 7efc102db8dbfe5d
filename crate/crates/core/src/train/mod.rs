//! Losses, the SGD training loop, checkpoints and inference.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod loss;
pub mod predict;
pub mod schedule;
pub mod trainer;
pub mod variant;

pub use checkpoint::{Checkpoint, ModelState};
pub use config::{Precision, TrainConfig};
pub use data::{Dataset, Sample, Split};
pub use loss::{compute_loss, compute_loss_terms, cross_entropy, LossReport, LossTerms};
pub use predict::{predict, Prediction};
pub use schedule::{PlateauSchedule, Sgd};
pub use trainer::{default_threads, log_csv, spec_for, EpochLog, TrainRun, Trainer};
pub use variant::{ModelVariant, VARIANT_NAMES};
