use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, ModelState};
use super::config::{Precision, TrainConfig};
use super::data::{crop, Dataset, Sample};
use super::loss::{compute_loss, LossReport};
use super::schedule::{PlateauSchedule, Sgd};
use crate::density::DensityMap;
use crate::error::{Error, Result};
use crate::grid::{Grid, Scalar};
use crate::net::{backward, forward, init_params_with, NetworkSpec, NetworkState};
use crate::partition::IntervalPartition;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "SDC_THREADS";

/// Worker count from `SDC_THREADS`, else the available parallelism.
pub fn default_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// SGD steps taken so far.
    pub iterations: usize,
    /// Mean total loss over the epoch's batches.
    pub loss: f64,
    pub l_c: Vec<f64>,
    pub l_r: Option<f64>,
    /// Learning rate used during the epoch.
    pub lr: f64,
}

/// `epoch,iterations,loss,lr` rows.
pub fn log_csv(log: &[EpochLog]) -> String {
    let mut s = String::from("epoch,iterations,loss,lr\n");
    for e in log {
        s.push_str(&format!("{},{},{},{}\n", e.epoch, e.iterations, e.loss, e.lr));
    }
    s
}

pub struct TrainRun {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochLog>,
}

/// The network a config trains.
pub fn spec_for(cfg: &TrainConfig) -> Result<NetworkSpec> {
    let p = cfg.partition.build()?;
    let spec = NetworkSpec::toy(cfg.variant.head_outputs(&p), cfg.variant.stages());
    spec.validate()?;
    Ok(spec)
}

pub struct Trainer {
    pub threads: usize,
}

impl Default for Trainer {
    fn default() -> Self {
        Self {
            threads: default_threads(),
        }
    }
}

impl Trainer {
    /// Single-threaded reference mode.
    pub fn reference() -> Self {
        Self { threads: 1 }
    }

    pub fn train(&self, data: &Dataset, cfg: &TrainConfig, spec: &NetworkSpec) -> Result<TrainRun> {
        self.train_with(data, cfg, spec, |_| {})
    }

    /// Trains from a fresh initialization, calling `on_epoch` after every
    /// epoch.
    pub fn train_with(
        &self,
        data: &Dataset,
        cfg: &TrainConfig,
        spec: &NetworkSpec,
        mut on_epoch: impl FnMut(&EpochLog),
    ) -> Result<TrainRun> {
        cfg.validate()?;
        spec.validate()?;
        let p = cfg.partition.build()?;
        if spec.stages != cfg.variant.stages() || spec.head_outputs != cfg.variant.head_outputs(&p) {
            return Err(Error::Config(format!(
                "network has {} stages and {} outputs; variant {} needs {} and {}",
                spec.stages,
                spec.head_outputs,
                cfg.variant.name(),
                cfg.variant.stages(),
                cfg.variant.head_outputs(&p)
            )));
        }
        if data.is_empty() {
            return Err(Error::EmptyInput("training set"));
        }
        let pool = if self.threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(self.threads)
                    .build()
                    .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };
        let (state, log) = match cfg.precision {
            Precision::F32 => {
                let (s, log) = run::<f32>(data, cfg, spec, &p, pool.as_ref(), &mut on_epoch)?;
                (ModelState::F32(s), log)
            }
            Precision::F64 => {
                let (s, log) = run::<f64>(data, cfg, spec, &p, pool.as_ref(), &mut on_epoch)?;
                (ModelState::F64(s), log)
            }
        };
        Ok(TrainRun {
            checkpoint: Checkpoint {
                spec: spec.clone(),
                config: cfg.clone(),
                state,
            },
            log,
        })
    }
}

const AUG_STREAM: u64 = 1 << 32;

/// Deterministic crop and flip of sample `pos` in `epoch`.
fn augment(s: &Sample, cfg: &TrainConfig, epoch: usize, pos: usize, n: usize) -> Result<(Grid<f64>, DensityMap)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(AUG_STREAM + (epoch * n + pos) as u64);
    let (h, w) = s.image.hw();
    let size = cfg.crop_px.unwrap_or(usize::MAX);
    let flip = cfg.hflip && rng.random_bool(0.5);
    if size >= h && size >= w && !flip {
        return Ok((s.image.clone(), s.density.clone()));
    }
    let (ch, cw) = (size.min(h), size.min(w));
    let a = cfg.crop_align_px;
    let top = a * rng.random_range(0..=(h - ch) / a);
    let left = a * rng.random_range(0..=(w - cw) / a);
    Ok((
        crop(&s.image, top, left, ch, cw, flip)?,
        DensityMap::new(crop(s.density.grid(), top, left, ch, cw, flip)?)?,
    ))
}

fn sample_grad<T: Scalar>(
    s: &Sample,
    cfg: &TrainConfig,
    spec: &NetworkSpec,
    p: &IntervalPartition,
    state: &NetworkState<T>,
    epoch: usize,
    pos: usize,
    n: usize,
) -> Result<(LossReport, NetworkState<T>)> {
    let (image, density) = augment(s, cfg, epoch, pos, n)?;
    let outputs = forward(spec, state, &image.cast::<T>(), true)?;
    let (report, grads_out) = compute_loss(&outputs, &density, p, &cfg.variant)?;
    let grads = backward(spec, state, &outputs, &grads_out)?;
    Ok((report, grads))
}

fn run<T: Scalar>(
    data: &Dataset,
    cfg: &TrainConfig,
    spec: &NetworkSpec,
    p: &IntervalPartition,
    pool: Option<&rayon::ThreadPool>,
    on_epoch: &mut impl FnMut(&EpochLog),
) -> Result<(NetworkState<T>, Vec<EpochLog>)> {
    let mut state = init_params_with::<T>(spec, cfg.seed, &cfg.init)?;
    let mut opt = Sgd::<T>::new(cfg.momentum);
    let mut schedule = PlateauSchedule::new(cfg.lr0, cfg.plateau_factor, cfg.plateau_patience);
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut iterations = 0;
    let mut log = Vec::new();
    let cap = cfg.max_iterations.unwrap_or(usize::MAX);

    for epoch in 0..cfg.max_epochs {
        if iterations >= cap {
            break;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);
        let lr = schedule.lr();
        let mut sum = 0.0;
        let mut sum_c = vec![0.0; spec.stages + 1];
        let mut sum_r = 0.0;
        let mut batches = 0;

        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            if iterations >= cap {
                break;
            }
            let base = b * cfg.batch_size;
            let work = |(k, &idx): (usize, &usize)| {
                sample_grad(&data.samples[idx], cfg, spec, p, &state, epoch, base + k, n)
            };
            let results: Vec<Result<(LossReport, NetworkState<T>)>> = if let Some(pool) = pool {
                pool.install(|| chunk.par_iter().enumerate().map(work).collect())
            } else {
                chunk.iter().enumerate().map(work).collect()
            };
            let mut total = NetworkState::<T>::zeros(spec)?;
            let inv = T::from_f64(1.0 / chunk.len() as f64);
            let mut batch_loss = 0.0;
            for r in results {
                let (report, grads) = r?;
                if !report.total.is_finite() || !grads.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        batch: b,
                        detail: format!("{report:?}"),
                    });
                }
                batch_loss += report.total / chunk.len() as f64;
                for (acc, v) in sum_c.iter_mut().zip(&report.l_c) {
                    *acc += v / chunk.len() as f64;
                }
                sum_r += report.l_r.unwrap_or(0.0) / chunk.len() as f64;
                total.add_scaled(&grads, inv);
            }
            opt.step(&mut state, &total, lr);
            if !state.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    detail: "parameters became non-finite after the update".into(),
                });
            }
            sum += batch_loss;
            batches += 1;
            iterations += 1;
        }

        let mean = sum / batches as f64;
        let entry = EpochLog {
            epoch,
            iterations,
            loss: mean,
            l_c: sum_c.iter().map(|v| v / batches as f64).collect(),
            l_r: (spec.stages > 0).then(|| sum_r / batches as f64),
            lr,
        };
        log::info!(
            "epoch {epoch} iter {iterations} loss {mean:.5} lr {lr:.2e} l_c {:?} l_r {:?}",
            entry.l_c,
            entry.l_r
        );
        on_epoch(&entry);
        log.push(entry);
        schedule.step(mean);
    }
    Ok((state, log))
}
