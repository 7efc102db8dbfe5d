use super::checkpoint::{Checkpoint, ModelState};
use crate::density::pad_to_stride;
use crate::error::Result;
use crate::grid::{CountMap, Grid, Scalar};
use crate::net::{forward, predict_counts, regress_counts, NetworkSpec, NetworkState, OUTPUT_STRIDE};
use crate::partition::IntervalPartition;
use crate::sdc::{multi_stage_merge, DivisionMask};

#[derive(Clone, Debug)]
pub struct Prediction {
    /// The merged count map `DIV_N`.
    pub div: CountMap,
    /// Integral of `div`.
    pub count: f64,
    /// Recovered `C_0..C_N`.
    pub counts: Vec<CountMap>,
    /// `W_1..W_N`.
    pub masks: Vec<DivisionMask>,
}

/// Counts objects in a `[1, H, W]` image of any size; the image is padded
/// to the network stride first.
pub fn predict(image: &Grid<f64>, ck: &Checkpoint) -> Result<Prediction> {
    let p = ck.config.partition.build()?;
    match &ck.state {
        ModelState::F32(s) => predict_with(image, &ck.spec, s, &ck.config.variant, &p),
        ModelState::F64(s) => predict_with(image, &ck.spec, s, &ck.config.variant, &p),
    }
}

pub fn predict_with<T: Scalar>(
    image: &Grid<f64>,
    spec: &NetworkSpec,
    state: &NetworkState<T>,
    variant: &super::ModelVariant,
    p: &IntervalPartition,
) -> Result<Prediction> {
    let padded = pad_to_stride(image, OUTPUT_STRIDE).cast::<T>();
    let outputs = forward(spec, state, &padded, false)?;
    let counts = if variant.is_regression() {
        regress_counts(&outputs, variant.clip())?
    } else {
        predict_counts(&outputs, p)?
    };
    let masks = outputs.division_masks()?;
    let merged = multi_stage_merge(&counts[0], &counts[1..], &masks)?;
    let count = merged.image_count();
    Ok(Prediction {
        div: merged.div,
        count,
        counts,
        masks,
    })
}
