//! Counting errors: MAE and RMSE of image totals, GAME(L) and per-bin
//! errors of sub-region counts.
//!
//! The RMSE is what counting tables traditionally label "MSE".

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::CountMap;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRecord {
    pub pred: f64,
    pub gt: f64,
    /// Predicted and ground-truth sub-region counts on the same grid.
    pub regions: Option<(CountMap, CountMap)>,
}

impl EvalRecord {
    pub fn new(pred: f64, gt: f64) -> Self {
        Self { pred, gt, regions: None }
    }
}

/// `(mae, rmse)` of image totals.
pub fn mae_rmse(records: &[EvalRecord]) -> Result<(f64, f64)> {
    if records.is_empty() {
        return Err(Error::EmptyInput("evaluation records"));
    }
    let n = records.len() as f64;
    let (abs, sq) = records.iter().fold((0.0, 0.0), |(a, s), r| {
        let e = r.pred - r.gt;
        (a + e.abs(), s + e * e)
    });
    Ok((abs / n, (sq / n).sqrt()))
}

/// Sum over the `2^L x 2^L` regions of `|pred - gt|` for one image.
pub fn game(pred: &CountMap, gt: &CountMap, level: u32) -> Result<f64> {
    if pred.hw() != gt.hw() {
        let (a, b) = (pred.hw(), gt.hw());
        return Err(Error::mismatch("GAME maps", &[b.0, b.1], &[a.0, a.1]));
    }
    let (h, w) = gt.hw();
    let side = 1usize << level;
    for (dim, size) in [(0, h), (1, w)] {
        if size % side != 0 {
            return Err(Error::ShapeNotDivisible { dim, size, k: side });
        }
    }
    let (rh, rw) = (h / side, w / side);
    let mut diff = vec![0.0; side * side];
    let (p, g) = (pred.grid().data(), gt.grid().data());
    for r in 0..h {
        for c in 0..w {
            diff[(r / rh) * side + c / rw] += p[r * w + c] - g[r * w + c];
        }
    }
    Ok(diff.iter().map(|d| d.abs()).sum())
}

/// GAME(L) averaged over images.
pub fn mean_game(records: &[EvalRecord], level: u32) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyInput("evaluation records"));
    }
    let mut total = 0.0;
    for r in records {
        let (p, g) = r
            .regions
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("GAME needs sub-region maps".into()))?;
        total += game(p, g, level)?;
    }
    Ok(total / records.len() as f64)
}

/// Errors of the sub-regions whose ground truth falls in `[low, high)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinError {
    pub low: f64,
    pub high: f64,
    pub n: usize,
    pub mae: Option<f64>,
    /// `mae` divided by the bin's mean ground truth; absent when that mean is 0.
    pub rmae: Option<f64>,
    /// Sum of absolute errors in the bin.
    pub abs_sum: f64,
}

/// Bins sub-regions by ground-truth count using consecutive `edges`.
pub fn per_bin_errors(records: &[EvalRecord], edges: &[f64]) -> Result<Vec<BinError>> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument(format!("bin edges must increase: {edges:?}")));
    }
    let nb = edges.len() - 1;
    let mut n = vec![0usize; nb];
    let mut abs = vec![0.0; nb];
    let mut gt_sum = vec![0.0; nb];
    for r in records {
        let (p, g) = r
            .regions
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("per-bin errors need sub-region maps".into()))?;
        if p.hw() != g.hw() {
            let (a, b) = (p.hw(), g.hw());
            return Err(Error::mismatch("sub-region maps", &[b.0, b.1], &[a.0, a.1]));
        }
        for (&pv, &gv) in p.grid().data().iter().zip(g.grid().data()) {
            let b = edges.partition_point(|&e| e <= gv);
            if b == 0 || b > nb {
                continue;
            }
            n[b - 1] += 1;
            abs[b - 1] += (pv - gv).abs();
            gt_sum[b - 1] += gv;
        }
    }
    Ok((0..nb)
        .map(|b| {
            let mae = (n[b] > 0).then(|| abs[b] / n[b] as f64);
            let mean_gt = gt_sum[b] / n[b].max(1) as f64;
            BinError {
                low: edges[b],
                high: edges[b + 1],
                n: n[b],
                mae,
                rmae: mae.filter(|_| mean_gt > 0.0).map(|m| m / mean_gt),
                abs_sum: abs[b],
            }
        })
        .collect())
}

/// Pooled MAE over the bins lying inside `[low, high]`.
pub fn pooled_mae(bins: &[BinError], low: f64, high: f64) -> Option<f64> {
    let (n, abs) = bins
        .iter()
        .filter(|b| b.low >= low && b.high <= high)
        .fold((0, 0.0), |(n, a), b| (n + b.n, a + b.abs_sum));
    (n > 0).then(|| abs / n as f64)
}

/// Unit-width bins centred on the integers `0..=max`.
pub fn integer_bins(max: usize) -> Vec<f64> {
    (0..=max + 1).map(|v| v as f64 - 0.5).collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn bins_csv(bins: &[BinError]) -> String {
    let mut s = String::from("bin_low,bin_high,n,mae,rmae\n");
    for b in bins {
        let _ = writeln!(s, "{},{},{},{},{}", b.low, b.high, b.n, opt(b.mae), opt(b.rmae));
    }
    s
}

pub fn summary_csv(rows: &[(String, f64)]) -> String {
    let mut s = String::from("metric,value\n");
    for (k, v) in rows {
        let _ = writeln!(s, "{k},{v}");
    }
    s
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
