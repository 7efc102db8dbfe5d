//! Runs a checkpoint over a dataset split and collects the metrics.

use std::path::Path;

use crate::density::local_counts;
use crate::error::{Error, Result};
use crate::grid::CountMap;
use crate::metrics::{integer_bins, mae_rmse, mean_game, per_bin_errors, BinError, EvalRecord};
use crate::net::OUTPUT_STRIDE;
use crate::pgm::write_pgm;
use crate::sdc::avg_redistribute;
use crate::train::{predict, Checkpoint, Dataset, Sample};

/// How predictions are produced.
#[derive(Clone, Copy, Debug)]
pub enum Predictor<'a> {
    Model(&'a Checkpoint),
    /// Predictions equal the ground truth.
    Oracle,
}

#[derive(Clone, Debug)]
pub struct EvalOptions {
    /// Highest GAME level reported.
    pub game: Option<u32>,
    /// Sub-region size for per-bin errors.
    pub region_px: usize,
    /// Largest integer bin centre.
    pub max_bin: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            game: None,
            region_px: OUTPUT_STRIDE,
            max_bin: 30,
        }
    }
}

pub struct EvalReport {
    pub records: Vec<EvalRecord>,
    /// Fine predicted and ground-truth maps per image; empty unless GAME was requested.
    pub game_maps: Vec<(CountMap, CountMap)>,
    pub summary: Vec<(String, f64)>,
    pub bins: Vec<BinError>,
}

/// Refines `m` by equal redistribution until its cells are at most `cell_px`.
fn refine_to(mut m: CountMap, cell_px: usize) -> CountMap {
    while m.cell_px() > cell_px && m.cell_px() >= 2 {
        m = avg_redistribute(&m);
    }
    m
}

/// Predicted DIV map for one sample and the mask grids `W_1..W_N`.
fn predict_sample(pred: Predictor, s: &Sample) -> Result<(CountMap, Vec<crate::sdc::DivisionMask>)> {
    match pred {
        Predictor::Model(ck) => {
            let p = predict(&s.image, ck)?;
            Ok((p.div, p.masks))
        }
        Predictor::Oracle => Ok((local_counts(&s.density, OUTPUT_STRIDE / 4)?, Vec::new())),
    }
}

/// Largest cell size dividing both sides of `hw` into `2^level` regions.
fn game_cell(hw: (usize, usize), level: u32) -> Result<usize> {
    let side = 1usize << level;
    let mut cell = OUTPUT_STRIDE;
    while cell > 1 && (hw.0 % (side * cell) != 0 || hw.1 % (side * cell) != 0) {
        cell /= 2;
    }
    if hw.0 % (side * cell) != 0 || hw.1 % (side * cell) != 0 {
        return Err(Error::ShapeNotDivisible {
            dim: 0,
            size: hw.0,
            k: side,
        });
    }
    Ok(cell)
}

pub fn evaluate(pred: Predictor, data: &Dataset, opts: &EvalOptions, mask_dir: Option<&Path>) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::EmptyInput("evaluation set"));
    }
    if let Some(dir) = mask_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut records = Vec::with_capacity(data.len());
    let mut game_maps = Vec::new();
    for s in &data.samples {
        let (div, masks) = predict_sample(pred, s)?;
        let gt_regions = local_counts(&s.density, opts.region_px)?;
        let pred_regions = if div.cell_px() >= opts.region_px {
            refine_to(div.clone(), opts.region_px)
        } else {
            div.coarsen(opts.region_px / div.cell_px())?
        };
        if let Some(level) = opts.game {
            let cell = game_cell(s.density.grid().hw(), level)?;
            let fine = if div.cell_px() >= cell {
                refine_to(div.clone(), cell)
            } else {
                div.coarsen(cell / div.cell_px())?
            };
            game_maps.push((fine, local_counts(&s.density, cell)?));
        }
        if let Some(dir) = mask_dir {
            for (i, m) in masks.iter().enumerate() {
                write_pgm(m.grid(), dir.join(format!("{}_w{}.pgm", s.name, i + 1)))?;
            }
        }
        records.push(EvalRecord {
            pred: div.total(),
            gt: s.count as f64,
            regions: Some((pred_regions, gt_regions)),
        });
    }
    let (mae, rmse) = mae_rmse(&records)?;
    let mut summary = vec![("mae".to_string(), mae), ("mse".to_string(), rmse)];
    if let Some(level) = opts.game {
        let with_maps: Vec<EvalRecord> = records
            .iter()
            .zip(&game_maps)
            .map(|(r, m)| EvalRecord {
                pred: r.pred,
                gt: r.gt,
                regions: Some(m.clone()),
            })
            .collect();
        for l in 0..=level {
            summary.push((format!("game{l}"), mean_game(&with_maps, l)?));
        }
    }
    let bins = per_bin_errors(&records, &integer_bins(opts.max_bin))?;
    Ok(EvalReport {
        records,
        game_maps,
        summary,
        bins,
    })
}
