//! Spatial divide-and-conquer merging of multi-resolution count maps.
//!
//! Stage `i` blends the coarser result, split evenly over each 2x2 block,
//! with the finer prediction `C_i` using the soft division mask `W_i`:
//! `DIV_i = (1 - W_i) * avg(DIV_{i-1}) + W_i * C_i`, with `DIV_0 = C_0`.

use crate::error::{Error, Result};
use crate::grid::{block_sum, CountMap, Grid};

/// Soft per-cell division weights in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DivisionMask {
    grid: Grid<f64>,
    cell_px: usize,
}

impl DivisionMask {
    pub fn new(grid: Grid<f64>, cell_px: usize) -> Result<Self> {
        if grid.ndims() != 2 {
            return Err(Error::InvalidShape(grid.shape().to_vec()));
        }
        if let Some(&v) = grid.data().iter().find(|v| !(**v >= 0.0 && **v <= 1.0)) {
            return Err(Error::InvalidArgument(format!("division weight {v} outside [0, 1]")));
        }
        Ok(Self { grid, cell_px })
    }

    pub fn filled(h: usize, w: usize, cell_px: usize, value: f64) -> Self {
        Self::new(Grid::filled(&[h, w], value), cell_px).expect("weight in [0, 1]")
    }

    pub fn grid(&self) -> &Grid<f64> {
        &self.grid
    }

    pub fn cell_px(&self) -> usize {
        self.cell_px
    }

    pub fn hw(&self) -> (usize, usize) {
        self.grid.hw()
    }
}

/// Result of merging `stages` divisions; `levels[i]` is `DIV_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct MergeResult {
    pub div: CountMap,
    pub stages: usize,
    pub levels: Vec<CountMap>,
}

impl MergeResult {
    pub fn image_count(&self) -> f64 {
        image_count(self)
    }
}

/// Splits every cell evenly into a 2x2 block of half-size cells.
///
/// Panics if `c` already has 1-pixel cells.
pub fn avg_redistribute(c: &CountMap) -> CountMap {
    assert!(c.cell_px() >= 2, "cannot divide 1-pixel cells");
    let (h, w) = c.hw();
    let src = c.grid();
    let g = Grid::from_fn2(2 * h, 2 * w, |r, col| src.get2(r / 2, col / 2) / 4.0);
    CountMap::new(g, c.cell_px() / 2).expect("redistributed counts stay non-negative")
}

fn check_stage(stage: usize, prev: &CountMap, c_i: &CountMap, w_i: &DivisionMask) -> Result<()> {
    let (h, w) = prev.hw();
    if c_i.hw() != (2 * h, 2 * w) {
        return Err(Error::Resolution {
            stage,
            detail: format!("counts are {:?}, expected {:?}", c_i.hw(), (2 * h, 2 * w)),
        });
    }
    if w_i.hw() != c_i.hw() {
        return Err(Error::Resolution {
            stage,
            detail: format!("mask is {:?}, counts are {:?}", w_i.hw(), c_i.hw()),
        });
    }
    if prev.cell_px() < 2 || c_i.cell_px() * 2 != prev.cell_px() {
        return Err(Error::Resolution {
            stage,
            detail: format!(
                "cell size {} does not halve {}",
                c_i.cell_px(),
                prev.cell_px()
            ),
        });
    }
    Ok(())
}

fn merge_checked(stage: usize, prev: &CountMap, c_i: &CountMap, w_i: &DivisionMask) -> Result<CountMap> {
    check_stage(stage, prev, c_i, w_i)?;
    let up = avg_redistribute(prev);
    let data = up
        .grid()
        .data()
        .iter()
        .zip(c_i.grid().data())
        .zip(w_i.grid().data())
        .map(|((&a, &c), &w)| (1.0 - w) * a + w * c)
        .collect();
    let (h, w) = c_i.hw();
    CountMap::new(Grid::new(vec![h, w], data)?, c_i.cell_px())
}

/// One merge stage: `(1 - w) * avg(prev) + w * c_i`.
pub fn merge_stage(prev: &CountMap, c_i: &CountMap, w_i: &DivisionMask) -> Result<CountMap> {
    merge_checked(1, prev, c_i, w_i)
}

pub fn multi_stage_merge(c_0: &CountMap, c: &[CountMap], w: &[DivisionMask]) -> Result<MergeResult> {
    if c.len() != w.len() {
        return Err(Error::InvalidArgument(format!(
            "{} count maps but {} division masks",
            c.len(),
            w.len()
        )));
    }
    let mut levels = Vec::with_capacity(c.len() + 1);
    levels.push(c_0.clone());
    for (i, (c_i, w_i)) in c.iter().zip(w).enumerate() {
        let next = merge_checked(i + 1, levels.last().expect("non-empty"), c_i, w_i)?;
        levels.push(next);
    }
    Ok(MergeResult {
        div: levels.last().expect("non-empty").clone(),
        stages: c.len(),
        levels,
    })
}

pub fn image_count(m: &MergeResult) -> f64 {
    m.div.total()
}

/// Gradients of a scalar loss through the merge.
#[derive(Clone, Debug, PartialEq)]
pub struct MergeGrads {
    /// With respect to `W_1..W_N`.
    pub w: Vec<Grid<f64>>,
    /// With respect to `C_0..C_N`.
    pub c: Vec<Grid<f64>>,
}

/// Back-propagates `d loss / d DIV_N` to every `W_i` and `C_i`.
pub fn merge_backward(
    merged: &MergeResult,
    c: &[CountMap],
    w: &[DivisionMask],
    grad_div: &Grid<f64>,
) -> Result<MergeGrads> {
    let n = merged.stages;
    if c.len() != n || w.len() != n || merged.levels.len() != n + 1 {
        return Err(Error::InvalidArgument("merge history does not match inputs".into()));
    }
    if grad_div.shape() != merged.div.grid().shape() {
        return Err(Error::mismatch(
            "merge gradient",
            merged.div.grid().shape(),
            grad_div.shape(),
        ));
    }
    let mut grads = vec![Grid::<f64>::zeros(&[1, 1]); n];
    let mut grads_c = vec![Grid::<f64>::zeros(&[1, 1]); n + 1];
    let mut g = grad_div.clone();
    for i in (1..=n).rev() {
        let up = avg_redistribute(&merged.levels[i - 1]);
        let (c_i, w_i) = (&c[i - 1], &w[i - 1]);
        grads[i - 1] = Grid::new(
            g.shape().to_vec(),
            g.data()
                .iter()
                .zip(c_i.grid().data())
                .zip(up.grid().data())
                .map(|((&gv, &cv), &av)| gv * (cv - av))
                .collect(),
        )?;
        grads_c[i] = g.zip_map(w_i.grid(), |gv, wv| gv * wv)?;
        // adjoint of avg: sum the four children, divide by four
        let through = g.zip_map(w_i.grid(), |gv, wv| gv * (1.0 - wv))?;
        g = block_sum(&through, 2)?.map(|v| v / 4.0);
    }
    grads_c[0] = g;
    Ok(MergeGrads { w: grads, c: grads_c })
}
