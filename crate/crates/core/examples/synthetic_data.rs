//! Writes the bundled demo dataset: `cargo run --example synthetic_data [PATH] [N] [SEED]`.
//!
//! Columns `score, history, noise, label, group`; `score` is missing far more often in
//! group 0 than in group 1.

use fairmip::dataset::synthetic::disparate_missing;
use fairmip::dataset::write_csv;

fn main() -> fairmip::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "crates/core/data/synthetic.csv".into());
    let n = args.next().map_or(Ok(1000), |s| s.parse()).expect("N must be an integer");
    let seed = args.next().map_or(Ok(2024), |s| s.parse()).expect("SEED must be an integer");
    let ds = disparate_missing(n, seed);
    write_csv(&ds, &path, "label", "group", "NA")?;
    let report = ds.missingness_report();
    let score = report.feature("score").expect("generator has a score column");
    println!(
        "wrote {n} rows to {path}; score missing in {:.1}% of group 0 and {:.1}% of group 1",
        100.0 * score.group0.rate,
        100.0 * score.group1.rate
    );
    Ok(())
}
