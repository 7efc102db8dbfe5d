//! Discretizing local counts into interval classes and recovering them.

use sdc_core::partition::{cmax_from_quantile, round_up_to_step, IntervalPartition};

fn main() -> sdc_core::Result<()> {
    let one = IntervalPartition::one_linear(0.5, 10.0)?;
    println!("One-Linear(0.5, 10): {} classes", one.num_classes());
    for c in [0.0, 0.2, 3.3, 9.9, 10.0, 14.0] {
        let k = one.class_of(c)?;
        let (lo, hi) = one.interval(k)?;
        println!("  count {c:5.2} -> class {k:2} ({lo}, {hi}] -> recovered {:.2}", one.count_of(k)?);
    }

    let two = IntervalPartition::two_linear(0.05, 0.5, 0.5, 7.0)?;
    println!("Two-Linear(0.05, 0.5, 0.5, 7): {} classes", two.num_classes());
    for c in [0.03, 0.12, 0.48, 0.7, 6.9, 30.0] {
        let k = two.class_of(c)?;
        println!("  count {c:5.2} -> class {k:2} -> recovered {:.3}", two.count_of(k)?);
    }

    // Picking c_max from the training distribution of local counts.
    let counts: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37) % 25.0).collect();
    let q95 = cmax_from_quantile(&counts, 0.95)?;
    println!("95% quantile {q95:.2}, rounded to the step: {}", round_up_to_step(q95, 0.5));
    Ok(())
}
