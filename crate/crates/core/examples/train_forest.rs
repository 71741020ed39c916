//! Trains a small fair forest on the bundled data and compares it with an
//! accuracy-only forest on a held-out split.

use fairmip::dataset::{load_csv, train_test_split, CsvOptions};
use fairmip::forest::{evaluate, train_with_log, TrainConfig};
use fairmip::FairnessMetric;

fn main() -> fairmip::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/synthetic.csv");
    let ds = load_csv(path, &CsvOptions::new("label", "group"))?.dataset;
    let (train, test) = train_test_split(&ds, 0.3, 7)?;
    let train = train.scale_unit_interval()?;
    let test = test.apply_scaling(train.scaling().expect("scaled above"))?;

    for lambda in [0.0, 2.0] {
        let cfg = TrainConfig {
            n_tree: 5,
            depth: 2,
            batch_size: 100,
            t_limit: 5.0,
            lambda,
            metric: FairnessMetric::FnrDiff,
            ..TrainConfig::default()
        };
        let (model, log) = train_with_log(&train, &cfg)?;
        let report = evaluate(&model, &test)?;
        println!(
            "lambda {lambda}: accuracy {:.3}, fnr_diff {:.3}, solver time {:.2}s, {} of {} trees proven optimal",
            report.summary.accuracy,
            report.summary.fnr_diff,
            log.total_solver_time,
            log.trees.iter().filter(|t| t.proven_optimal).count(),
            log.trees.len()
        );
    }
    Ok(())
}
