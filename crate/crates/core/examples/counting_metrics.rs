//! MAE, RMSE, GAME and per-bin errors on hand-made count maps.

use sdc_core::grid::{CountMap, Grid};
use sdc_core::metrics::{bins_csv, game, integer_bins, mae_rmse, per_bin_errors, EvalRecord};

fn main() -> sdc_core::Result<()> {
    let gt = CountMap::new(Grid::new(vec![4, 4], vec![0., 1., 2., 3., 4., 5., 6., 7., 0., 0., 1., 1., 9., 9., 2., 2.])?, 16)?;
    let pred = CountMap::new(gt.grid().map(|v| (v * 0.8 + 0.3).min(6.0)), 16)?;

    for level in 0..=2 {
        println!("GAME({level}) = {:.3}", game(&pred, &gt, level)?);
    }

    let records = vec![
        EvalRecord {
            pred: pred.total(),
            gt: gt.total(),
            regions: Some((pred.clone(), gt.clone())),
        },
        EvalRecord::new(40.0, 37.0),
    ];
    let (mae, rmse) = mae_rmse(&records)?;
    println!("MAE {mae:.3}, RMSE {rmse:.3}");

    let bins = per_bin_errors(&records[..1], &integer_bins(9))?;
    print!("{}", bins_csv(&bins));
    Ok(())
}
