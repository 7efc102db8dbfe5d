//! Turns point annotations into density maps and integrates local counts.

use sdc_core::density::{density_from_points, local_counts, KernelSpec, PointSet};

fn main() -> sdc_core::Result<()> {
    let pts = PointSet::new(
        128,
        128,
        vec![[10.0, 12.0], [20.0, 18.0], [30.5, 70.25], [100.0, 100.0], [101.0, 96.0], [127.0, 1.0]],
    )?;

    for kernel in [KernelSpec::Fixed { sigma: 4.0 }, KernelSpec::geometry_adaptive()] {
        let d = density_from_points(&pts, &kernel)?;
        println!("{kernel:?}");
        println!("  total mass {:.6} for {} points", d.total(), pts.len());
        for cell in [64, 32] {
            let c = local_counts(&d, cell)?;
            let (h, w) = c.hw();
            let rows: Vec<String> = (0..h)
                .map(|r| (0..w).map(|col| format!("{:.2}", c.grid().get2(r, col))).collect::<Vec<_>>().join(" "))
                .collect();
            println!("  {cell}px cells:\n    {}", rows.join("\n    "));
        }
    }

    // Zero padding to the network stride keeps every count.
    let odd = PointSet::new(100, 90, vec![[45.0, 50.0]])?;
    let d = density_from_points(&odd, &KernelSpec::Fixed { sigma: 3.0 })?.padded(64);
    println!("padded to {:?}, mass {:.6}", d.grid().hw(), d.total());
    Ok(())
}
