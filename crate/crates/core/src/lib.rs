//! Spatial divide-and-conquer (S-DC) object counting.
//!
//! Local counts are discretized into a closed set of interval classes; a
//! small encoder-decoder predicts those classes at several resolutions and a
//! learned division mask merges them into one count map whose integral is the
//! image count. The crate also ships the synthetic cell dataset used to show
//! that a model trained on a closed set of local counts still handles larger
//! counts once it can divide.

pub mod cli;
pub mod config;
pub mod density;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod grid;
pub mod metrics;
pub mod net;
pub mod partition;
pub mod pgm;
pub mod sdc;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
