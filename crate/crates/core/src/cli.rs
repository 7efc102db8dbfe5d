//! The `sdc` command line: `synth`, `train` and `eval`.
//!
//! Exit codes are 0 on success, 1 on a runtime failure and 2 on a usage
//! error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::builder::PossibleValuesParser;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalOptions, Predictor};
use crate::metrics::{bins_csv, summary_csv, write_text};
use crate::synth::gen_dataset;
use crate::train::{log_csv, spec_for, Checkpoint, Dataset, ModelVariant, Split, Trainer, VARIANT_NAMES};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const CONFIG_ECHO: &str = "config.json";
pub const TRAIN_LOG: &str = "train_log.csv";

#[derive(Parser, Debug)]
#[command(name = "sdc", version, about = "Spatial divide-and-conquer counting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the synthetic cell dataset.
    Synth(SynthArgs),
    /// Train a model on a dataset directory.
    Train(TrainArgs),
    /// Evaluate a checkpoint and write metric CSVs.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = PossibleValuesParser::new(VARIANT_NAMES))]
    variant: Option<String>,
    #[arg(long)]
    stages: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Cap on SGD steps.
    #[arg(long)]
    iterations: Option<usize>,
    /// Single-threaded reference path.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, required_unless_present = "oracle")]
    checkpoint: Option<PathBuf>,
    /// Predict the ground truth instead of running a model.
    #[arg(long, conflicts_with = "checkpoint")]
    oracle: bool,
    /// Report GAME(0) through GAME(L).
    #[arg(long)]
    game: Option<u32>,
    /// Write every division mask as a PGM image.
    #[arg(long)]
    dump_masks: bool,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    deterministic: bool,
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if seed.is_some() {
        cfg.seed = seed;
        cfg = cfg.seeded();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn required(flag: Option<PathBuf>, fallback: &Option<PathBuf>, name: &str) -> std::result::Result<PathBuf, Failure> {
    flag.or_else(|| fallback.clone())
        .ok_or_else(|| Failure::Usage(format!("--{name} is required (or set \"{name}\" in the config)")))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn cmd_synth(a: SynthArgs) -> std::result::Result<(), Failure> {
    let mut cfg = load_config(a.config.as_deref(), a.seed)?;
    cfg.out = Some(a.out.clone());
    let manifest = gen_dataset(&cfg.synth.train, &cfg.synth.test, &a.out)?;
    cfg.data = Some(a.out.clone());
    cfg.save(a.out.join(CONFIG_ECHO))?;
    println!(
        "wrote {} train and {} test images to {}",
        manifest.train.len(),
        manifest.test.len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_train(a: TrainArgs) -> std::result::Result<(), Failure> {
    let mut cfg = load_config(a.config.as_deref(), a.seed)?;
    let data = required(a.data, &cfg.data, "data")?;
    let out = required(a.out, &cfg.out, "out")?;
    if let Some(name) = &a.variant {
        let stages = a.stages.unwrap_or(match cfg.train.variant.stages() {
            0 => 2,
            s => s,
        });
        cfg.train.variant = ModelVariant::from_name(name, stages, cfg.train.partition.c_max())?;
    } else if let Some(stages) = a.stages {
        let name = cfg.train.variant.name();
        cfg.train.variant = ModelVariant::from_name(name, stages, cfg.train.partition.c_max())?;
    }
    if a.iterations.is_some() {
        cfg.train.max_iterations = a.iterations;
    }
    cfg.data = Some(data.clone());
    cfg.out = Some(out.clone());
    cfg.validate()?;
    let spec = match &cfg.network {
        Some(n) => n.clone(),
        None => spec_for(&cfg.train)?,
    };
    let set = Dataset::load(&data, Split::Train, &cfg.train.kernel)?;
    let trainer = if a.deterministic { Trainer::reference() } else { Trainer::default() };
    create_dir(&out)?;
    cfg.save(out.join(CONFIG_ECHO))?;
    let run = trainer.train_with(&set, &cfg.train, &spec, |e| {
        eprintln!("epoch {:>4}  iter {:>6}  loss {:.5}  lr {:.1e}", e.epoch, e.iterations, e.loss, e.lr)
    })?;
    run.checkpoint.save(out.join(CHECKPOINT_FILE))?;
    write_text(out.join(TRAIN_LOG), &log_csv(&run.log))?;
    println!("wrote {}", out.join(CHECKPOINT_FILE).display());
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> std::result::Result<(), Failure> {
    let mut cfg = load_config(a.config.as_deref(), a.seed)?;
    let data = required(a.data, &cfg.data, "data")?;
    let out = required(a.out, &cfg.out, "out")?;
    let ck = match &a.checkpoint {
        Some(p) => Some(Checkpoint::load(p)?),
        None => None,
    };
    let kernel = ck.as_ref().map(|c| c.config.kernel.clone()).unwrap_or_else(|| cfg.train.kernel.clone());
    let split = match a.split {
        SplitArg::Train => Split::Train,
        SplitArg::Test => Split::Test,
    };
    let set = Dataset::load(&data, split, &kernel)?;
    let pred = match &ck {
        Some(c) => Predictor::Model(c),
        None => Predictor::Oracle,
    };
    let opts = EvalOptions {
        game: a.game,
        region_px: cfg.eval.region_px,
        max_bin: cfg.eval.max_bin,
    };
    create_dir(&out)?;
    let masks = a.dump_masks.then(|| out.join("masks"));
    let report = evaluate(pred, &set, &opts, masks.as_deref())?;
    write_text(out.join("summary.csv"), &summary_csv(&report.summary))?;
    write_text(out.join("bins.csv"), &bins_csv(&report.bins))?;
    let mut per_image = String::from("image,pred,gt\n");
    for (s, r) in set.samples.iter().zip(&report.records) {
        let _ = writeln!(per_image, "{},{},{}", s.name, r.pred, r.gt);
    }
    write_text(out.join("images.csv"), &per_image)?;
    if let Some(c) = &ck {
        cfg.train = c.config.clone();
        cfg.network = Some(c.spec.clone());
    }
    cfg.data = Some(data);
    cfg.out = Some(out.clone());
    cfg.save(out.join(CONFIG_ECHO))?;
    for (k, v) in &report.summary {
        println!("{k} {v:.4}");
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn main() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    run(std::env::args_os())
}
