//! Writes a grid and a grayscale image to disk and reads them back.

use sdc_core::grid::{block_sum, read_grid, write_grid, Grid};
use sdc_core::pgm::{read_pgm, write_pgm};

fn main() -> sdc_core::Result<()> {
    let dir = std::env::temp_dir();
    let g = Grid::from_fn2(4, 6, |r, c| (r * 6 + c) as f64 / 23.0);
    let grid_path = dir.join("example.grid");
    write_grid(&g, &grid_path)?;
    let back = read_grid(&grid_path)?;
    println!("grid {:?} round trip exact: {}", back.shape(), back == g);
    println!("2x2 block sums {:?}", block_sum(&g, 2)?.data());

    let pgm_path = dir.join("example.pgm");
    write_pgm(&g, &pgm_path)?;
    let img = read_pgm(&pgm_path)?;
    let worst = img.data().iter().zip(g.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("pgm {:?}, worst 8-bit quantization error {worst:.4}", img.shape());
    Ok(())
}
