//! Trains a two-stage model briefly, saves and reloads the checkpoint, then
//! counts a held-out image.
//!
//! Usage: `cargo run --release --example train_and_predict -- [ITERATIONS]`

use sdc_core::config::RunConfig;
use sdc_core::synth::gen_dataset;
use sdc_core::train::{predict, spec_for, Checkpoint, Dataset, Split, Trainer};

fn main() -> sdc_core::Result<()> {
    let iterations: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    let dir = std::env::temp_dir().join("sdc_train_example");

    let mut cfg = RunConfig::toy();
    cfg.synth.train.n_images = 40;
    cfg.synth.test.n_images = 4;
    cfg.train.max_iterations = Some(iterations);
    gen_dataset(&cfg.synth.train, &cfg.synth.test, &dir)?;

    let train = Dataset::load(&dir, Split::Train, &cfg.train.kernel)?;
    let spec = spec_for(&cfg.train)?;
    let run = Trainer::reference().train_with(&train, &cfg.train, &spec, |e| {
        println!("epoch {:3}  iter {:5}  loss {:.4}  l_c {:.3?}  l_r {:.4?}", e.epoch, e.iterations, e.loss, e.l_c, e.l_r)
    })?;

    let path = dir.join("model.ckpt");
    run.checkpoint.save(&path)?;
    let ck = Checkpoint::load_for(&path, &spec)?;

    let test = Dataset::load(&dir, Split::Test, &cfg.train.kernel)?;
    for s in &test.samples {
        let p = predict(&s.image, &ck)?;
        let w_mean: Vec<f64> = p.masks.iter().map(|m| m.grid().sum() / m.grid().len() as f64).collect();
        println!("{}: predicted {:6.2}, annotated {:3}, mean W {:.2?}", s.name, p.count, s.count, w_mean);
    }
    Ok(())
}
