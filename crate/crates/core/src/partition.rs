//! Discretization of non-negative local counts into interval classes.
//!
//! Classes are indexed `0..=M+1`: class 0 is the singleton `{0}`, class `j`
//! for `1 <= j <= M` is `(C_{j-1}, C_j]` with `C_0 = 0`, and class `M+1` is
//! the open tail `(C_max, inf)`. Recovery maps a class to the midpoint of
//! its interval; the tail saturates at `C_max`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::CountMap;

const MULTIPLE_TOL: f64 = 1e-9;

/// Serializable description of a partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PartitionConfig {
    OneLinear {
        step: f64,
        c_max: f64,
    },
    TwoLinear {
        fine_step: f64,
        fine_end: f64,
        coarse_step: f64,
        c_max: f64,
    },
}

impl PartitionConfig {
    pub fn build(&self) -> Result<IntervalPartition> {
        match *self {
            PartitionConfig::OneLinear { step, c_max } => IntervalPartition::one_linear(step, c_max),
            PartitionConfig::TwoLinear {
                fine_step,
                fine_end,
                coarse_step,
                c_max,
            } => IntervalPartition::two_linear(fine_step, fine_end, coarse_step, c_max),
        }
    }

    pub fn c_max(&self) -> f64 {
        match *self {
            PartitionConfig::OneLinear { c_max, .. } | PartitionConfig::TwoLinear { c_max, .. } => {
                c_max
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntervalPartition {
    config: PartitionConfig,
    boundaries: Vec<f64>,
    medians: Vec<f64>,
}

/// Number of `step`s in `span`, or an error if `span` is not a multiple.
fn steps_in(span: f64, step: f64, what: &str) -> Result<usize> {
    let n = (span / step).round();
    if n < 1.0 || (n * step - span).abs() > MULTIPLE_TOL {
        return Err(Error::InvalidArgument(format!(
            "{what} {span} is not a positive multiple of step {step}"
        )));
    }
    Ok(n as usize)
}

fn require_positive(v: f64, name: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
    }
}

impl IntervalPartition {
    pub fn one_linear(step: f64, c_max: f64) -> Result<Self> {
        require_positive(step, "step")?;
        require_positive(c_max, "c_max")?;
        let m = steps_in(c_max, step, "c_max")?;
        let mut boundaries: Vec<f64> = (1..=m).map(|i| i as f64 * step).collect();
        *boundaries.last_mut().expect("m >= 1") = c_max;
        Ok(Self::from_boundaries(
            PartitionConfig::OneLinear { step, c_max },
            boundaries,
        ))
    }

    pub fn two_linear(fine_step: f64, fine_end: f64, coarse_step: f64, c_max: f64) -> Result<Self> {
        require_positive(fine_step, "fine_step")?;
        require_positive(fine_end, "fine_end")?;
        require_positive(coarse_step, "coarse_step")?;
        require_positive(c_max, "c_max")?;
        if fine_end >= c_max {
            return Err(Error::InvalidArgument(format!(
                "fine_end {fine_end} must be below c_max {c_max}"
            )));
        }
        let fine = steps_in(fine_end, fine_step, "fine_end")?;
        let coarse = steps_in(c_max - fine_end, coarse_step, "c_max - fine_end")?;
        let mut boundaries: Vec<f64> = (1..=fine).map(|i| i as f64 * fine_step).collect();
        *boundaries.last_mut().expect("fine >= 1") = fine_end;
        boundaries.extend((1..=coarse).map(|i| fine_end + i as f64 * coarse_step));
        *boundaries.last_mut().expect("coarse >= 1") = c_max;
        Ok(Self::from_boundaries(
            PartitionConfig::TwoLinear {
                fine_step,
                fine_end,
                coarse_step,
                c_max,
            },
            boundaries,
        ))
    }

    fn from_boundaries(config: PartitionConfig, boundaries: Vec<f64>) -> Self {
        let mut medians = Vec::with_capacity(boundaries.len() + 2);
        medians.push(0.0);
        let mut lo = 0.0;
        for &hi in &boundaries {
            medians.push((lo + hi) / 2.0);
            lo = hi;
        }
        medians.push(lo);
        Self {
            config,
            boundaries,
            medians,
        }
    }

    pub fn config(&self) -> &PartitionConfig {
        &self.config
    }

    /// Finite boundaries `C_1..C_M`.
    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn medians(&self) -> &[f64] {
        &self.medians
    }

    pub fn c_max(&self) -> f64 {
        *self.boundaries.last().expect("non-empty partition")
    }

    pub fn num_classes(&self) -> usize {
        self.boundaries.len() + 2
    }

    pub fn class_of(&self, count: f64) -> Result<usize> {
        if !(count >= 0.0) {
            return Err(Error::NegativeCount(count));
        }
        if count == 0.0 {
            return Ok(0);
        }
        // first boundary >= count closes the interval holding it
        Ok(self.boundaries.partition_point(|&b| b < count) + 1)
    }

    pub fn count_of(&self, class: usize) -> Result<f64> {
        self.medians
            .get(class)
            .copied()
            .ok_or(Error::ClassOutOfRange {
                index: class,
                num_classes: self.num_classes(),
            })
    }

    /// Lower and upper bound of a class interval (`{0}` gives `(0, 0)`).
    pub fn interval(&self, class: usize) -> Result<(f64, f64)> {
        let n = self.num_classes();
        if class >= n {
            return Err(Error::ClassOutOfRange {
                index: class,
                num_classes: n,
            });
        }
        Ok(match class {
            0 => (0.0, 0.0),
            c if c == n - 1 => (self.c_max(), f64::INFINITY),
            1 => (0.0, self.boundaries[0]),
            c => (self.boundaries[c - 2], self.boundaries[c - 1]),
        })
    }

    pub fn labels_from_counts(&self, counts: &CountMap) -> Result<LabelMap> {
        let (h, w) = counts.hw();
        let labels = counts
            .grid()
            .data()
            .iter()
            .map(|&c| self.class_of(c))
            .collect::<Result<Vec<_>>>()?;
        Ok(LabelMap { h, w, labels })
    }
}

/// Per-cell class indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    pub h: usize,
    pub w: usize,
    pub labels: Vec<usize>,
}

/// Nearest-rank `q`-quantile: the element at rank `ceil(q * n)` of the
/// sorted input.
pub fn cmax_from_quantile(counts: &[f64], q: f64) -> Result<f64> {
    if counts.is_empty() {
        return Err(Error::EmptyInput("quantile of an empty list"));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidArgument(format!("quantile {q} outside (0, 1]")));
    }
    if let Some(&v) = counts.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::NegativeCount(v));
    }
    let mut sorted = counts.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = ((q * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    Ok(sorted[rank - 1])
}

/// Rounds `v` up to the nearest multiple of `step`.
pub fn round_up_to_step(v: f64, step: f64) -> f64 {
    let n = (v / step - 1e-9).ceil().max(1.0);
    n * step
}
