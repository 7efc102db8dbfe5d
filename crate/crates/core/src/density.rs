//! Ground-truth density maps from point annotations, and their integration
//! into per-cell local counts.
//!
//! Pixel `(r, c)` covers `[c, c+1) x [r, r+1)` and is sampled at its center
//! `(c + 0.5, r + 0.5)`. Every kernel is truncated at `3 sigma` and at the
//! image border, then renormalized so each point contributes mass 1.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{block_sum, CountMap, Grid, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSet {
    pub width: usize,
    pub height: usize,
    /// `[x, y]` = `[column, row]` in pixels.
    pub points: Vec<[f64; 2]>,
}

impl PointSet {
    pub fn new(width: usize, height: usize, points: Vec<[f64; 2]>) -> Result<Self> {
        let ps = Self {
            width,
            height,
            points,
        };
        ps.validate()?;
        Ok(ps)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidArgument("point set with empty extent".into()));
        }
        for &[x, y] in &self.points {
            if !(x >= 0.0 && x < self.width as f64 && y >= 0.0 && y < self.height as f64) {
                return Err(Error::InvalidArgument(format!(
                    "point ({x}, {y}) outside {}x{}",
                    self.width, self.height
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ps: PointSet = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        ps.validate()?;
        Ok(ps)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).map_err(|e| Error::json(path, e))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    Fixed {
        sigma: f64,
    },
    GeometryAdaptive {
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default = "default_k")]
        k: usize,
        /// Used when fewer than `k + 1` points exist.
        #[serde(default = "default_fallback_sigma")]
        fallback_sigma: f64,
    },
}

fn default_beta() -> f64 {
    0.3
}
fn default_k() -> usize {
    3
}
fn default_fallback_sigma() -> f64 {
    15.0
}

impl KernelSpec {
    pub fn geometry_adaptive() -> Self {
        KernelSpec::GeometryAdaptive {
            beta: default_beta(),
            k: default_k(),
            fallback_sigma: default_fallback_sigma(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            KernelSpec::Fixed { sigma } => sigma > 0.0,
            KernelSpec::GeometryAdaptive {
                beta,
                k,
                fallback_sigma,
            } => beta > 0.0 && k >= 1 && fallback_sigma > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid kernel {self:?}")))
        }
    }

    /// Per-point kernel widths.
    pub fn sigmas(&self, points: &[[f64; 2]]) -> Vec<f64> {
        match *self {
            KernelSpec::Fixed { sigma } => vec![sigma; points.len()],
            KernelSpec::GeometryAdaptive {
                beta,
                k,
                fallback_sigma,
            } => {
                if points.len() < k + 1 {
                    return vec![fallback_sigma; points.len()];
                }
                points
                    .iter()
                    .enumerate()
                    .map(|(i, &[x, y])| {
                        let mut d: Vec<f64> = points
                            .iter()
                            .enumerate()
                            .filter(|&(j, _)| j != i)
                            .map(|(_, &[u, v])| ((u - x).powi(2) + (v - y).powi(2)).sqrt())
                            .collect();
                        d.sort_by(f64::total_cmp);
                        let mean = d[..k].iter().sum::<f64>() / k as f64;
                        // coincident neighbours would give a zero-width kernel
                        if mean > 0.0 {
                            beta * mean
                        } else {
                            fallback_sigma
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Non-negative image-sized field whose integral is the object count.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMap {
    grid: Grid<f64>,
}

impl DensityMap {
    pub fn new(grid: Grid<f64>) -> Result<Self> {
        if grid.ndims() != 2 {
            return Err(Error::InvalidShape(grid.shape().to_vec()));
        }
        if let Some(&v) = grid.data().iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::NegativeCount(v));
        }
        Ok(Self { grid })
    }

    pub fn grid(&self) -> &Grid<f64> {
        &self.grid
    }

    pub fn into_grid(self) -> Grid<f64> {
        self.grid
    }

    pub fn total(&self) -> f64 {
        self.grid.sum()
    }

    pub fn padded(&self, stride: usize) -> DensityMap {
        DensityMap {
            grid: pad_to_stride(&self.grid, stride),
        }
    }
}

/// Adds a unit-mass truncated Gaussian centered at `(x, y)` into `out`.
fn splat(out: &mut [f64], h: usize, w: usize, x: f64, y: f64, sigma: f64) {
    let radius = 3.0 * sigma;
    let r2 = radius * radius;
    let inv = 1.0 / (2.0 * sigma * sigma);
    let c0 = ((x - radius - 0.5).ceil().max(0.0)) as usize;
    let c1 = ((x + radius - 0.5).floor().min(w as f64 - 1.0)).max(-1.0);
    let r0 = ((y - radius - 0.5).ceil().max(0.0)) as usize;
    let r1 = ((y + radius - 0.5).floor().min(h as f64 - 1.0)).max(-1.0);
    let mut taps = Vec::new();
    let mut total = 0.0;
    if c1 >= 0.0 && r1 >= 0.0 {
        for r in r0..=r1 as usize {
            let dy = r as f64 + 0.5 - y;
            for c in c0..=c1 as usize {
                let dx = c as f64 + 0.5 - x;
                let d2 = dx * dx + dy * dy;
                if d2 <= r2 {
                    let v = (-d2 * inv).exp();
                    taps.push((r * w + c, v));
                    total += v;
                }
            }
        }
    }
    if total > 0.0 {
        for (i, v) in taps {
            out[i] += v / total;
        }
    } else {
        // kernel narrower than a pixel: all mass in the containing pixel
        let r = (y.floor() as usize).min(h - 1);
        let c = (x.floor() as usize).min(w - 1);
        out[r * w + c] += 1.0;
    }
}

pub fn density_from_points(pts: &PointSet, ks: &KernelSpec) -> Result<DensityMap> {
    pts.validate()?;
    ks.validate()?;
    let (h, w) = (pts.height, pts.width);
    let mut data = vec![0.0; h * w];
    for (&[x, y], sigma) in pts.points.iter().zip(ks.sigmas(&pts.points)) {
        splat(&mut data, h, w, x, y, sigma);
    }
    DensityMap::new(Grid::new(vec![h, w], data)?)
}

/// Integrates a density map over `cell_px x cell_px` cells.
pub fn local_counts(d: &DensityMap, cell_px: usize) -> Result<CountMap> {
    CountMap::new(block_sum(d.grid(), cell_px)?, cell_px)
}

/// Zero-pads the two trailing dimensions (bottom/right) up to multiples of
/// `stride`.
pub fn pad_to_stride<T: Scalar>(g: &Grid<T>, stride: usize) -> Grid<T> {
    let stride = stride.max(1);
    let (h, w) = g.hw();
    let (ph, pw) = (h.div_ceil(stride) * stride, w.div_ceil(stride) * stride);
    if (ph, pw) == (h, w) {
        return g.clone();
    }
    let nd = g.ndims();
    let mut shape = g.shape().to_vec();
    shape[nd - 1] = pw;
    if nd >= 2 {
        shape[nd - 2] = ph;
    }
    let mut data = vec![T::ZERO; g.planes() * ph * pw];
    for p in 0..g.planes() {
        for r in 0..h {
            let src = &g.data()[(p * h + r) * w..(p * h + r + 1) * w];
            data[(p * ph + r) * pw..(p * ph + r) * pw + w].copy_from_slice(src);
        }
    }
    Grid::new(shape, data).expect("padded shape")
}
