//! `L = sum_i L_C^i + L_R^N`.
//!
//! `L_C^i` is the per-cell mean softmax cross-entropy of level `i` against
//! interval labels of the ground-truth local counts (or, for regression
//! heads, the per-cell mean absolute error). `L_R^N` is the per-cell mean
//! absolute error of the merged `DIV_N`. Counts recovered by argmax are
//! constants inside it, so for classifier heads it only trains the division
//! decider; regressed counts are differentiable and receive its gradient
//! too.

use super::variant::ModelVariant;
use crate::density::{local_counts, DensityMap};
use crate::error::{Error, Result};
use crate::grid::{CountMap, Grid, Scalar};
use crate::net::{predict_counts, regress_counts, ForwardOutputs, NetworkSpec, OutputGrads};
use crate::partition::IntervalPartition;
use crate::sdc::{merge_backward, multi_stage_merge};

#[derive(Clone, Debug, PartialEq)]
pub struct LossReport {
    /// One term per level (cross-entropy, or absolute error for regression).
    pub l_c: Vec<f64>,
    /// Final merged-count term; absent without division.
    pub l_r: Option<f64>,
    pub total: f64,
}

/// Which terms contribute gradients. Excluded terms report as zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossTerms {
    All,
    /// Only the per-level terms.
    Levels,
    /// Only the per-level term of one level.
    Level(usize),
    /// Only the merged-count term.
    Final,
}

impl LossTerms {
    fn level(&self, i: usize) -> bool {
        match *self {
            LossTerms::All | LossTerms::Levels => true,
            LossTerms::Level(l) => l == i,
            LossTerms::Final => false,
        }
    }

    fn last(&self) -> bool {
        matches!(self, LossTerms::All | LossTerms::Final)
    }
}

/// Softmax cross-entropy averaged over cells, and its logit gradient.
pub fn cross_entropy<T: Scalar>(logits: &Grid<T>, labels: &[usize]) -> Result<(f64, Grid<T>)> {
    let (k, h, w) = (logits.shape()[0], logits.shape()[1], logits.shape()[2]);
    let hw = h * w;
    if labels.len() != hw {
        return Err(Error::mismatch("cross-entropy labels", &[hw], &[labels.len()]));
    }
    let d = logits.data();
    let mut grad = vec![T::ZERO; k * hw];
    let mut total = 0.0;
    let inv = 1.0 / hw as f64;
    let mut probs = vec![0.0; k];
    for (cell, &label) in labels.iter().enumerate() {
        if label >= k {
            return Err(Error::ClassOutOfRange {
                index: label,
                num_classes: k,
            });
        }
        let max = (0..k).map(|c| d[c * hw + cell].to_f64()).fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for (c, p) in probs.iter_mut().enumerate() {
            *p = (d[c * hw + cell].to_f64() - max).exp();
            z += *p;
        }
        total += z.ln() + max - d[label * hw + cell].to_f64();
        for (c, p) in probs.iter().enumerate() {
            let onehot = if c == label { 1.0 } else { 0.0 };
            grad[c * hw + cell] = T::from_f64((p / z - onehot) * inv);
        }
    }
    Ok((total * inv, Grid::new(vec![k, h, w], grad)?))
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Mean absolute error of `pred` against `target` and its gradient.
fn l1<T: Scalar>(pred: &[T], target: &[f64]) -> (f64, Vec<T>) {
    let inv = 1.0 / target.len() as f64;
    let mut total = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let e = p.to_f64() - t;
            total += e.abs();
            T::from_f64(sign(e) * inv)
        })
        .collect();
    (total * inv, grad)
}

/// Ground-truth local counts for every level of `outputs`.
pub fn level_targets<T: Scalar>(outputs: &ForwardOutputs<T>, gt: &DensityMap) -> Result<Vec<CountMap>> {
    outputs
        .cls
        .iter()
        .enumerate()
        .map(|(i, y)| {
            let cm = local_counts(gt, NetworkSpec::cell_px(i)).map_err(|e| Error::Resolution {
                stage: i,
                detail: e.to_string(),
            })?;
            let want = (y.shape()[1], y.shape()[2]);
            if cm.hw() != want {
                return Err(Error::Resolution {
                    stage: i,
                    detail: format!("ground truth is {:?} cells, outputs are {want:?}", cm.hw()),
                });
            }
            Ok(cm)
        })
        .collect()
}

pub fn compute_loss<T: Scalar>(
    outputs: &ForwardOutputs<T>,
    gt_density: &DensityMap,
    p: &IntervalPartition,
    variant: &ModelVariant,
) -> Result<(LossReport, OutputGrads<T>)> {
    compute_loss_terms(outputs, gt_density, p, variant, LossTerms::All)
}

pub fn compute_loss_terms<T: Scalar>(
    outputs: &ForwardOutputs<T>,
    gt_density: &DensityMap,
    p: &IntervalPartition,
    variant: &ModelVariant,
    terms: LossTerms,
) -> Result<(LossReport, OutputGrads<T>)> {
    let stages = variant.stages();
    if outputs.levels() != stages + 1 || outputs.w.len() != stages {
        return Err(Error::Resolution {
            stage: outputs.levels().saturating_sub(1),
            detail: format!("variant expects {} levels, outputs have {}", stages + 1, outputs.levels()),
        });
    }
    let targets = level_targets(outputs, gt_density)?;

    let mut l_c = Vec::with_capacity(stages + 1);
    let mut cls_grads: Vec<Option<Grid<T>>> = Vec::with_capacity(stages + 1);
    for (i, (y, gt)) in outputs.cls.iter().zip(&targets).enumerate() {
        let (value, grad) = if variant.is_regression() {
            let hi = variant.clip().unwrap_or(f64::INFINITY);
            let target: Vec<f64> = gt.grid().data().iter().map(|v| v.min(hi)).collect();
            let (v, g) = l1(y.data(), &target);
            (v, Grid::new(y.shape().to_vec(), g)?)
        } else {
            let labels = p.labels_from_counts(gt)?;
            cross_entropy(y, &labels.labels)?
        };
        if terms.level(i) {
            l_c.push(value);
            cls_grads.push(Some(grad));
        } else {
            l_c.push(0.0);
            cls_grads.push(None);
        }
    }

    let mut w_grads: Vec<Option<Grid<T>>> = (0..stages).map(|_| None).collect();
    let l_r = if stages > 0 {
        let counts = if variant.is_regression() {
            regress_counts(outputs, variant.clip())?
        } else {
            predict_counts(outputs, p)?
        };
        let masks = outputs.division_masks()?;
        let merged = multi_stage_merge(&counts[0], &counts[1..], &masks)?;
        let gt = &targets[stages];
        let (value, grad_div) = l1(merged.div.grid().data(), gt.grid().data());
        if terms.last() {
            let (h, w) = gt.hw();
            let grad_div = Grid::new(vec![h, w], grad_div)?;
            let back = merge_backward(&merged, &counts[1..], &masks, &grad_div)?;
            for (slot, g) in w_grads.iter_mut().zip(back.w) {
                *slot = Some(g.cast());
            }
            if variant.is_regression() {
                let hi = variant.clip().unwrap_or(f64::INFINITY);
                for ((slot, y), gc) in cls_grads.iter_mut().zip(&outputs.cls).zip(&back.c) {
                    let through: Vec<T> = y
                        .data()
                        .iter()
                        .zip(gc.data())
                        .map(|(&v, &g)| {
                            let v = v.to_f64();
                            T::from_f64(if v > 0.0 && v < hi { g } else { 0.0 })
                        })
                        .collect();
                    let through = Grid::new(y.shape().to_vec(), through)?;
                    match slot {
                        Some(acc) => {
                            for (a, &b) in acc.data_mut().iter_mut().zip(through.data()) {
                                *a += b;
                            }
                        }
                        None => *slot = Some(through),
                    }
                }
            }
            Some(value)
        } else {
            Some(0.0)
        }
    } else {
        None
    };

    let total = l_c.iter().sum::<f64>() + l_r.unwrap_or(0.0);
    Ok((
        LossReport { l_c, l_r, total },
        OutputGrads {
            cls: cls_grads,
            w: w_grads,
        },
    ))
}
