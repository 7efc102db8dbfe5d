//! Generates a small synthetic cell dataset and checks its sub-region counts.
//!
//! Usage: `cargo run --example synth_dataset -- [OUT_DIR]`

use sdc_core::synth::{gen_dataset, gen_indexed, points_per_subregion, SynthConfig};

fn main() -> sdc_core::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| {
        std::env::temp_dir().join("sdc_synth_example").to_string_lossy().into_owned()
    });
    let train = SynthConfig::toy_train(8, 7);
    let test = SynthConfig::toy_test(8, 8);
    let manifest = gen_dataset(&train, &test, &out)?;
    println!("{} train / {} test images in {out}", manifest.train.len(), manifest.test.len());

    for (name, cfg) in [("train", &train), ("test", &test)] {
        let (_, pts) = gen_indexed(cfg, 0)?;
        let counts = points_per_subregion(&pts, cfg.subregion_px);
        println!("{name} image 0: {} cells, per 64px sub-region {counts:?}", pts.len());
    }
    Ok(())
}
