//! Traces the fairness-accuracy frontier over a lambda grid with repeated splits and
//! prints the trade-off table as CSV.

use fairmip::dataset::synthetic::disparate_missing;
use fairmip::forest::{sweep_lambda, TrainConfig};

fn main() -> fairmip::Result<()> {
    let ds = disparate_missing(1200, 9);
    let cfg = TrainConfig { depth: 2, n_tree: 3, batch_size: 100, t_limit: 10.0, seed: 1, ..TrainConfig::default() };
    let result = sweep_lambda(&ds, &cfg, &[0.0, 0.5, 1.0, 2.0], 5, 0.3)?;
    print!("{}", result.to_csv());
    Ok(())
}
