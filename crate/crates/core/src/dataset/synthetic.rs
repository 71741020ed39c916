//! Seeded synthetic datasets for examples, demos and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TabularDataset;

fn on_grid(x: f64, step: f64) -> f64 {
    ((x / step).round() * step).clamp(0.0, 1.0)
}

/// Three-feature dataset whose most informative feature goes missing far more often in
/// group 0 (rates 0.4 vs 0.1), producing a false-negative-rate gap for error-only trees.
///
/// * `score` drives the label; missing at rate 0.4 (group 0) / 0.1 (group 1).
/// * `history` is a weaker, fully observed proxy of the label.
/// * `noise` is unrelated to the label.
///
/// Values lie on a 0.05 grid in `[0, 1]`. Columns: `score, history, noise`.
pub fn disparate_missing(n: usize, seed: u64) -> TabularDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for _ in 0..n {
        let s = u8::from(rng.random_bool(0.5));
        let score: f64 = rng.random();
        let y = u8::from(score + 0.15 * (rng.random::<f64>() - 0.5) > 0.6);
        let history = if rng.random_bool(0.5) {
            0.3 * f64::from(y) + 0.7 * rng.random::<f64>()
        } else {
            rng.random::<f64>()
        };
        let noise: f64 = rng.random();
        let p_missing = if s == 0 { 0.4 } else { 0.1 };
        let score = (!rng.random_bool(p_missing)).then(|| on_grid(score, 0.05));
        rows.push(vec![score, Some(on_grid(history, 0.05)), Some(on_grid(noise, 0.05))]);
        labels.push(y);
        groups.push(s);
    }
    TabularDataset::from_rows(
        &rows,
        labels,
        groups,
        vec!["score".into(), "history".into(), "noise".into()],
    )
    .expect("generator produces a consistent dataset")
}

/// Fully observed dataset with Adult-style column names (`gender` is the group,
/// `income` the label), used to calibrate missingness injection.
pub fn adult_like(n: usize, seed: u64) -> TabularDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for _ in 0..n {
        let gender = u8::from(rng.random_bool(0.5));
        let age = rng.random_range(17..=90) as f64;
        let marital = rng.random_range(0..7) as f64;
        let hours = rng.random_range(1..=99) as f64;
        let race = rng.random_range(0..5) as f64;
        let income = u8::from(rng.random::<f64>() < 0.3 + 0.2 * f64::from(gender));
        rows.push(vec![Some(age), Some(marital), Some(hours), Some(race)]);
        labels.push(income);
        groups.push(gender);
    }
    TabularDataset::from_rows(
        &rows,
        labels,
        groups,
        ["age", "marital-status", "hours-per-week", "race"]
            .map(String::from)
            .to_vec(),
    )
    .expect("generator produces a consistent dataset")
}

/// Fully observed dataset with COMPAS-style column names (`race` is the group,
/// `two_year_recid` the label).
pub fn compas_like(n: usize, seed: u64) -> TabularDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for _ in 0..n {
        let race = u8::from(rng.random_bool(0.5));
        let priors = rng.random_range(0..20) as f64;
        let sex = f64::from(u8::from(rng.random_bool(0.8)));
        let age_cat = rng.random_range(0..3) as f64;
        let degree = f64::from(u8::from(rng.random_bool(0.35)));
        let recid = u8::from(rng.random::<f64>() < 0.25 + 0.03 * priors.min(10.0));
        rows.push(vec![Some(age_cat), Some(sex), Some(priors), Some(degree)]);
        labels.push(recid);
        groups.push(race);
    }
    TabularDataset::from_rows(
        &rows,
        labels,
        groups,
        ["age_cat", "sex", "priors_count", "c_charge_degree"]
            .map(String::from)
            .to_vec(),
    )
    .expect("generator produces a consistent dataset")
}
