//! Trains the classification baseline, the regression baseline and a
//! two-stage S-DC model on sub-region counts in [0, 10], then compares their
//! errors on test counts up to 20.
//!
//! Usage: `cargo run --release --example closed_to_open -- [OUT_DIR] [N_IMAGES] [ITERATIONS]`
//!
//! The defaults (200 images, 5000 iterations) take roughly 25 minutes on one core.

use sdc_core::config::RunConfig;
use sdc_core::experiment::{comparison_table, run_toy, toy_variants, variant_label};
use sdc_core::train::Trainer;

fn main() -> sdc_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| std::env::temp_dir().join("sdc_closed_to_open").to_string_lossy().into_owned());
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(200);
    let iters: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(5000);

    let mut cfg = RunConfig::toy();
    cfg.synth.train.n_images = n;
    cfg.synth.test.n_images = n;
    cfg.train.max_iterations = Some(iters);

    let outcomes = run_toy(&cfg, &toy_variants(), &Trainer::default(), out.as_ref())?;
    println!("{}", comparison_table(&outcomes, 20));
    for o in &outcomes {
        println!(
            "{:16} [0,8] {:.3}  [3,8] {:.3}  [15,20] {:.3}  image MAE {:.2}  ({:.0}s)",
            variant_label(&o.variant),
            o.band_mae(0, 8).unwrap_or(f64::NAN),
            o.band_mae(3, 8).unwrap_or(f64::NAN),
            o.band_mae(15, 20).unwrap_or(f64::NAN),
            o.summary[0].1,
            o.train_seconds
        );
    }
    println!("outputs in {out}");
    Ok(())
}
