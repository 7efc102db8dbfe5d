//! Compares the hand-written backward pass against central finite
//! differences on a network with two channels per layer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdc_core::density::DensityMap;
use sdc_core::grid::Grid;
use sdc_core::net::{gradcheck, init_params_with, GradCheckConfig, InitScheme, NetworkSpec};
use sdc_core::partition::IntervalPartition;
use sdc_core::train::{compute_loss, ModelVariant};

fn main() -> sdc_core::Result<()> {
    let p = IntervalPartition::one_linear(0.5, 10.0)?;
    let variant = ModelVariant::Sdcnet { stages: 2 };
    let spec = NetworkSpec::tiny(variant.head_outputs(&p), variant.stages());
    let state = init_params_with::<f64>(&spec, 3, &InitScheme::Gaussian { std: 0.4 })?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let image = Grid::new(vec![1, 64, 64], (0..4096).map(|_| rng.random_range(0.0..1.0)).collect())?;
    let density = DensityMap::new(Grid::new(vec![64, 64], (0..4096).map(|_| rng.random_range(0.0..0.003)).collect())?)?;

    let report = gradcheck(
        &spec,
        &state,
        &image,
        |out| {
            let (r, g) = compute_loss(out, &density, &p, &variant)?;
            Ok((r.total, g))
        },
        &GradCheckConfig::default(),
    )?;
    for t in &report.tensors {
        println!("{:28} max rel err {:9.2e}  ({} checked, {} kinks)", t.name, t.max_rel_error, t.checked, t.skipped_kinks);
    }
    println!("worst {:.2e}, passed: {}", report.max_rel_error(), report.passed());
    Ok(())
}
