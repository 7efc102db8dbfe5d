use std::path::{Path, PathBuf};

use crate::density::{density_from_points, DensityMap, KernelSpec, PointSet};
use crate::error::{Error, Result};
use crate::grid::{Grid, Scalar};
use crate::net::OUTPUT_STRIDE;
use crate::pgm::read_pgm;
use crate::synth::{Manifest, SampleEntry};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// One annotated image, padded to the network stride.
#[derive(Clone, Debug)]
pub struct Sample {
    pub name: String,
    /// `[1, H, W]` intensities in `[0, 1]`.
    pub image: Grid<f64>,
    pub density: DensityMap,
    /// Number of annotated points.
    pub count: usize,
    /// Size before padding.
    pub orig_hw: (usize, usize),
}

#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub samples: Vec<Sample>,
}

impl Dataset {
    /// Loads one split of a dataset directory described by its manifest,
    /// rendering ground-truth densities with `kernel`.
    pub fn load(dir: impl AsRef<Path>, split: Split, kernel: &KernelSpec) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest = Manifest::load(dir)?;
        let entries = match split {
            Split::Train => &manifest.train,
            Split::Test => &manifest.test,
        };
        Self::from_entries(dir, entries, kernel)
    }

    pub fn from_entries(dir: &Path, entries: &[SampleEntry], kernel: &KernelSpec) -> Result<Self> {
        let samples = entries
            .iter()
            .map(|e| load_sample(dir, e, kernel))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// The first `n` samples.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            samples: self.samples.iter().take(n).cloned().collect(),
        }
    }
}

fn load_sample(dir: &Path, e: &SampleEntry, kernel: &KernelSpec) -> Result<Sample> {
    let image = read_pgm(dir.join(&e.image))?;
    let points = PointSet::load(dir.join(&e.points))?;
    let hw = image.hw();
    if (points.height, points.width) != hw {
        return Err(Error::mismatch(
            format!("annotation size of {}", e.points),
            &[hw.0, hw.1],
            &[points.height, points.width],
        ));
    }
    Ok(Sample {
        name: stem(&e.image),
        image: crate::density::pad_to_stride(&image, OUTPUT_STRIDE),
        density: density_from_points(&points, kernel)?.padded(OUTPUT_STRIDE),
        count: points.len(),
        orig_hw: hw,
    })
}

fn stem(path: &str) -> String {
    PathBuf::from(path)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string())
}

/// Copies the `ch x cw` window at `(top, left)` out of the trailing two
/// dims, mirroring it left-right when `flip` is set.
pub fn crop<T: Scalar>(g: &Grid<T>, top: usize, left: usize, ch: usize, cw: usize, flip: bool) -> Result<Grid<T>> {
    let (h, w) = g.hw();
    if top + ch > h || left + cw > w {
        return Err(Error::InvalidArgument(format!(
            "crop {ch}x{cw} at ({top}, {left}) exceeds {h}x{w}"
        )));
    }
    let planes = g.len() / (h * w);
    let src = g.data();
    let mut out = Vec::with_capacity(planes * ch * cw);
    for p in 0..planes {
        for r in 0..ch {
            let row = &src[p * h * w + (top + r) * w + left..][..cw];
            if flip {
                out.extend(row.iter().rev());
            } else {
                out.extend_from_slice(row);
            }
        }
    }
    let mut shape = g.shape().to_vec();
    let n = shape.len();
    shape[n - 2] = ch;
    shape[n - 1] = cw;
    Grid::new(shape, out)
}
