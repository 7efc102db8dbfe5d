//! The synthetic closed-to-open experiment: train on sub-region counts in
//! `[0, 10]`, test on `[0, 20]`, and compare per-bin errors across models.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalOptions, Predictor};
use crate::metrics::{bins_csv, pooled_mae, summary_csv, write_text, BinError};
use crate::synth::gen_dataset;
use crate::train::{log_csv, spec_for, Checkpoint, Dataset, EpochLog, ModelVariant, Split, Trainer};

pub struct VariantOutcome {
    pub variant: ModelVariant,
    pub dir: PathBuf,
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochLog>,
    pub bins: Vec<BinError>,
    pub summary: Vec<(String, f64)>,
    pub train_seconds: f64,
}

impl VariantOutcome {
    /// Pooled sub-region MAE over ground-truth counts `lo..=hi`.
    pub fn band_mae(&self, lo: usize, hi: usize) -> Option<f64> {
        pooled_mae(&self.bins, lo as f64 - 0.5, hi as f64 + 0.5)
    }
}

/// Directory name for a variant's outputs.
pub fn variant_label(v: &ModelVariant) -> String {
    match v.stages() {
        0 => v.name().to_string(),
        n => format!("{}{n}", v.name()),
    }
}

/// The three models of the experiment.
pub fn toy_variants() -> Vec<ModelVariant> {
    vec![
        ModelVariant::Classification,
        ModelVariant::Regression,
        ModelVariant::Sdcnet { stages: 2 },
    ]
}

/// Generates the dataset under `dir/data`, then trains and evaluates every
/// variant, writing `model.ckpt`, `train_log.csv`, `bins.csv`,
/// `summary.csv` and `config.json` under `dir/<variant>`.
pub fn run_toy(base: &RunConfig, variants: &[ModelVariant], trainer: &Trainer, dir: &Path) -> Result<Vec<VariantOutcome>> {
    base.validate()?;
    let data_dir = dir.join("data");
    gen_dataset(&base.synth.train, &base.synth.test, &data_dir)?;
    let train = Dataset::load(&data_dir, Split::Train, &base.train.kernel)?;
    let test = Dataset::load(&data_dir, Split::Test, &base.train.kernel)?;
    let opts = EvalOptions {
        game: None,
        region_px: base.eval.region_px,
        max_bin: base.eval.max_bin,
    };
    let mut outcomes = Vec::with_capacity(variants.len());
    for v in variants {
        let mut cfg = base.clone();
        cfg.train.variant = v.clone();
        cfg.data = Some(data_dir.clone());
        let out = dir.join(variant_label(v));
        std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        cfg.out = Some(out.clone());
        cfg.save(out.join("config.json"))?;
        let spec = spec_for(&cfg.train)?;
        let start = Instant::now();
        let run = trainer.train(&train, &cfg.train, &spec)?;
        let train_seconds = start.elapsed().as_secs_f64();
        run.checkpoint.save(out.join("model.ckpt"))?;
        write_text(out.join("train_log.csv"), &log_csv(&run.log))?;
        let report = evaluate(Predictor::Model(&run.checkpoint), &test, &opts, None)?;
        write_text(out.join("bins.csv"), &bins_csv(&report.bins))?;
        write_text(out.join("summary.csv"), &summary_csv(&report.summary))?;
        log::info!("{} trained in {train_seconds:.0}s: {:?}", variant_label(v), report.summary);
        outcomes.push(VariantOutcome {
            variant: v.clone(),
            dir: out,
            checkpoint: run.checkpoint,
            log: run.log,
            bins: report.bins,
            summary: report.summary,
            train_seconds,
        });
    }
    Ok(outcomes)
}

/// Per-bin MAE of every outcome side by side, one row per ground-truth count.
pub fn comparison_table(outcomes: &[VariantOutcome], max_count: usize) -> String {
    let mut s = String::from("gt");
    for o in outcomes {
        let _ = write!(s, "{:>16}", variant_label(&o.variant));
    }
    s.push('\n');
    for c in 0..=max_count {
        let _ = write!(s, "{c:>2}");
        for o in outcomes {
            match o.bins.get(c).and_then(|b| b.mae) {
                Some(m) => {
                    let _ = write!(s, "{m:>16.3}");
                }
                None => {
                    let _ = write!(s, "{:>16}", "-");
                }
            }
        }
        s.push('\n');
    }
    s
}
