//! Encoder-decoder counter with a shared count-interval classifier and a
//! division decider, forward and backward passes written out by hand.
//!
//! Five encoder blocks (two 3x3 convolutions and a 2x2 max-pool each) bring
//! the input to stride 32; that is level 0. Each decoder stage upsamples the
//! previous level, concatenates the encoder feature of the same resolution
//! and fuses with a 3x3 convolution. Both heads start with a 2x2 average
//! pool, so level `i` predicts on `64 / 2^i` pixel cells.

pub mod gradcheck;
pub mod layers;
mod model;

pub use gradcheck::{gradcheck, GradCheckConfig, GradCheckReport, TensorCheck};
pub use layers::{ConvParams, LayerCache, LayerKind};
pub use model::{
    argmax_classes, backward, forward, init_params, init_params_with, predict_counts,
    regress_counts, ForwardCache, ForwardOutputs, HeadParams, InitScheme, NetworkSpec,
    NetworkState, OutputGrads, OUTPUT_STRIDE,
};
