//! Synthetic cell images with a controlled number of cells per sub-region.
//!
//! Each sub-region independently draws its count uniformly from
//! `count_range` and places that many cell centers uniformly inside the
//! sub-region, kept `cell_radius_px` away from its border so the drawn count
//! is exactly the sub-region's ground truth.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::density::PointSet;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::pgm::write_pgm;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

/// Cell appearance. These are fixed rendering conventions, echoed into the
/// manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Renderer {
    /// Blob sigma as a fraction of the cell radius.
    pub blob_sigma_ratio: f64,
    pub peak_range: [f64; 2],
    pub noise_std: f64,
}

impl Default for Renderer {
    fn default() -> Self {
        Self {
            blob_sigma_ratio: 0.5,
            peak_range: [0.6, 1.0],
            noise_std: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub image_size: usize,
    pub subregion_px: usize,
    pub n_images: usize,
    /// Inclusive `[lo, hi]` cells per sub-region.
    pub count_range: [usize; 2],
    pub cell_radius_px: f64,
    pub seed: u64,
    #[serde(default)]
    pub renderer: Renderer,
}

impl SynthConfig {
    /// Closed training split: 256x256 images, 64x64 sub-regions, 0..=10 cells.
    pub fn toy_train(n_images: usize, seed: u64) -> Self {
        Self {
            image_size: 256,
            subregion_px: 64,
            n_images,
            count_range: [0, 10],
            cell_radius_px: 6.0,
            seed,
            renderer: Renderer::default(),
        }
    }

    /// Open test split: same geometry, 0..=20 cells per sub-region.
    pub fn toy_test(n_images: usize, seed: u64) -> Self {
        Self {
            count_range: [0, 20],
            ..Self::toy_train(n_images, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.subregion_px == 0 || self.image_size == 0 || self.image_size % self.subregion_px != 0 {
            return bad(format!(
                "image size {} is not a multiple of sub-region size {}",
                self.image_size, self.subregion_px
            ));
        }
        if self.count_range[0] > self.count_range[1] {
            return bad(format!("empty count range {:?}", self.count_range));
        }
        if !(self.cell_radius_px > 0.0) {
            return bad("cell radius must be positive".into());
        }
        let r = &self.renderer;
        if !(r.blob_sigma_ratio > 0.0 && r.noise_std >= 0.0 && r.peak_range[0] <= r.peak_range[1]) {
            return bad(format!("invalid renderer {r:?}"));
        }
        let inner = self.subregion_px as f64 - 2.0 * self.cell_radius_px;
        let capacity = (self.subregion_px as f64).powi(2) / (std::f64::consts::PI * self.cell_radius_px.powi(2));
        if inner <= 0.0 || self.count_range[1] as f64 > capacity {
            return Err(Error::InfeasiblePlacement(format!(
                "{} cells of radius {} do not fit a {}px sub-region",
                self.count_range[1], self.cell_radius_px, self.subregion_px
            )));
        }
        Ok(())
    }

    pub fn subregions_per_side(&self) -> usize {
        self.image_size / self.subregion_px
    }

    /// Independent stream for image `index`.
    pub fn image_rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }
}

/// One rendered image `[1, H, W]` in `[0, 1]` and its cell centers.
pub fn gen_image(cfg: &SynthConfig, rng: &mut impl Rng) -> Result<(Grid<f64>, PointSet)> {
    cfg.validate()?;
    let size = cfg.image_size;
    let sub = cfg.subregion_px as f64;
    let r = cfg.cell_radius_px;
    let [lo, hi] = cfg.count_range;
    let mut points = Vec::new();
    for sy in 0..cfg.subregions_per_side() {
        for sx in 0..cfg.subregions_per_side() {
            let n = rng.random_range(lo..=hi);
            let (x0, y0) = (sx as f64 * sub, sy as f64 * sub);
            for _ in 0..n {
                let x = x0 + r + rng.random::<f64>() * (sub - 2.0 * r);
                let y = y0 + r + rng.random::<f64>() * (sub - 2.0 * r);
                points.push([x, y]);
            }
        }
    }

    let mut img = vec![0.0; size * size];
    let sigma = r * cfg.renderer.blob_sigma_ratio;
    let support = (3.0 * sigma).ceil() as isize;
    let [plo, phi] = cfg.renderer.peak_range;
    for &[x, y] in &points {
        let peak = if phi > plo { rng.random_range(plo..=phi) } else { plo };
        let (cx, cy) = (x.floor() as isize, y.floor() as isize);
        for py in (cy - support).max(0)..=(cy + support).min(size as isize - 1) {
            for px in (cx - support).max(0)..=(cx + support).min(size as isize - 1) {
                let dx = px as f64 + 0.5 - x;
                let dy = py as f64 + 0.5 - y;
                img[py as usize * size + px as usize] += peak * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
            }
        }
    }
    let noise = (cfg.renderer.noise_std > 0.0)
        .then(|| Normal::new(0.0, cfg.renderer.noise_std).expect("positive std"));
    for v in img.iter_mut() {
        *v = v.clamp(0.0, 1.0);
        if let Some(n) = &noise {
            *v = (*v + n.sample(rng)).clamp(0.0, 1.0);
        }
    }
    Ok((
        Grid::new(vec![1, size, size], img)?,
        PointSet::new(size, size, points)?,
    ))
}

/// Image `index` of a split, from its own RNG stream.
pub fn gen_indexed(cfg: &SynthConfig, index: usize) -> Result<(Grid<f64>, PointSet)> {
    gen_image(cfg, &mut cfg.image_rng(index))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleEntry {
    pub image: String,
    pub points: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub train: SynthConfig,
    pub test: SynthConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub generator: Option<Generator>,
    pub train: Vec<SampleEntry>,
    pub test: Vec<SampleEntry>,
}

impl Manifest {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::json(&path, e))?;
        if m.format_version != MANIFEST_VERSION {
            return Err(Error::UnsupportedVersion(format!(
                "manifest format {} (expected {MANIFEST_VERSION})",
                m.format_version
            )));
        }
        Ok(m)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(&path, e))?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }
}

fn write_split(cfg: &SynthConfig, dir: &Path, split: &str) -> Result<Vec<SampleEntry>> {
    let sub = dir.join(split);
    fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
    (0..cfg.n_images)
        .map(|i| {
            let (img, pts) = gen_indexed(cfg, i)?;
            let entry = SampleEntry {
                image: format!("{split}/img_{i:05}.pgm"),
                points: format!("{split}/img_{i:05}.json"),
            };
            write_pgm(&img, dir.join(&entry.image))?;
            pts.save(dir.join(&entry.points))?;
            Ok(entry)
        })
        .collect()
}

/// Writes both splits and `manifest.json` into `out_dir`.
pub fn gen_dataset(cfg_train: &SynthConfig, cfg_test: &SynthConfig, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    cfg_train.validate()?;
    cfg_test.validate()?;
    let dir: PathBuf = out_dir.as_ref().to_path_buf();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let manifest = Manifest {
        format_version: MANIFEST_VERSION,
        generator: Some(Generator {
            train: cfg_train.clone(),
            test: cfg_test.clone(),
        }),
        train: write_split(cfg_train, &dir, "train")?,
        test: write_split(cfg_test, &dir, "test")?,
    };
    manifest.save(&dir)?;
    Ok(manifest)
}

/// Number of points inside each `px x px` sub-region, row-major.
pub fn points_per_subregion(pts: &PointSet, px: usize) -> Vec<usize> {
    let (nx, ny) = (pts.width.div_ceil(px), pts.height.div_ceil(px));
    let mut counts = vec![0; nx * ny];
    for &[x, y] in &pts.points {
        counts[(y as usize / px) * nx + x as usize / px] += 1;
    }
    counts
}
