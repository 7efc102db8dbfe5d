//! Divides a single 64-pixel cell into four and merges the finer counts back
//! with a division mask.

use sdc_core::grid::{CountMap, Grid};
use sdc_core::sdc::{avg_redistribute, merge_stage, multi_stage_merge, DivisionMask};

fn show(label: &str, g: &Grid<f64>) {
    let (h, w) = g.hw();
    println!("{label}:");
    for r in 0..h {
        let row: Vec<String> = (0..w).map(|c| format!("{:6.2}", g.get2(r, c))).collect();
        println!("  {}", row.join(" "));
    }
}

fn main() -> sdc_core::Result<()> {
    // The coarse prediction saturates at 8; the finer one sees a dense corner.
    let c0 = CountMap::new(Grid::new(vec![1, 1], vec![8.0])?, 64)?;
    let c1 = CountMap::new(Grid::new(vec![2, 2], vec![1.0, 2.0, 3.0, 10.0])?, 32)?;
    let w1 = DivisionMask::new(Grid::new(vec![2, 2], vec![0.0, 0.0, 0.0, 1.0])?, 32)?;

    show("C_0", c0.grid());
    show("avg(C_0)", avg_redistribute(&c0).grid());
    show("C_1", c1.grid());
    show("W_1", w1.grid());
    let div1 = merge_stage(&c0, &c1, &w1)?;
    show("DIV_1 = (1 - W_1) * avg(C_0) + W_1 * C_1", div1.grid());
    println!("image count {} (C_0 alone says {})", div1.total(), c0.total());

    // A second stage that keeps the coarser answer everywhere conserves the count.
    let c2 = CountMap::new(Grid::filled(&[4, 4], 0.0), 16)?;
    let w2 = DivisionMask::filled(4, 4, 16, 0.0);
    let merged = multi_stage_merge(&c0, &[c1, c2], &[w1, w2])?;
    show("DIV_2 with W_2 = 0", merged.div.grid());
    println!("image count {}", merged.image_count());
    Ok(())
}
