use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TabularDataset;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissingnessEntry {
    pub feature: String,
    /// Erasure probability for group 0.
    pub p0: f64,
    /// Erasure probability for group 1.
    pub p1: f64,
}

/// Per-group erasure probabilities, one entry per targeted feature.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissingnessSpec {
    pub entries: Vec<MissingnessEntry>,
}

impl MissingnessSpec {
    pub fn new(entries: impl IntoIterator<Item = (&'static str, f64, f64)>) -> Self {
        Self {
            entries: entries
                .into_iter()
                .map(|(f, p0, p1)| MissingnessEntry {
                    feature: f.into(),
                    p0,
                    p1,
                })
                .collect(),
        }
    }

    /// Adult rates used for the published experiments.
    pub fn adult() -> Self {
        Self::new([
            ("marital-status", 0.0, 0.4),
            ("hours-per-week", 0.0, 0.3),
            ("race", 0.2, 0.2),
        ])
    }

    /// COMPAS rates used for the published experiments.
    pub fn compas() -> Self {
        Self::new([("priors_count", 0.4, 0.1), ("sex", 0.6, 0.2)])
    }

    pub fn validate(&self) -> Result<()> {
        for e in &self.entries {
            for p in [e.p0, e.p1] {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::invalid(format!(
                        "probability {p} for `{}` is outside [0, 1]",
                        e.feature
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Masks each targeted cell independently with its group's probability.
///
/// One uniform draw is consumed per (row, entry) in row-major order, whether or not the
/// cell is already missing, so the result is a pure function of the seed. Cells never
/// become unmasked.
pub fn inject_missingness(
    ds: &TabularDataset,
    spec: &MissingnessSpec,
    seed: u64,
) -> Result<TabularDataset> {
    spec.validate()?;
    let targets = spec
        .entries
        .iter()
        .map(|e| {
            ds.feature_index(&e.feature)
                .map(|j| (j, [e.p0, e.p1]))
                .ok_or_else(|| Error::UnknownFeature(e.feature.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let d = ds.n_features();
    let mut mask = ds.mask().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..ds.n_rows() {
        let g = ds.groups()[i] as usize;
        for &(j, p) in &targets {
            let u: f64 = rng.random();
            if u < p[g] {
                mask[i * d + j] = true;
            }
        }
    }
    Ok(ds.with_mask(mask))
}

/// Splits rows into `(train, test)`, stratified by group.
///
/// The test set has `round(n * test_fraction)` rows, apportioned to the groups by
/// largest remainder so each group is within one row of its proportional share.
pub fn train_test_split(
    ds: &TabularDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(TabularDataset, TabularDataset)> {
    let n = ds.n_rows();
    if n < 2 {
        return Err(Error::invalid("need at least two rows to split"));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "test fraction {test_fraction} must lie strictly between 0 and 1"
        )));
    }
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(Error::invalid(format!(
            "test fraction {test_fraction} leaves an empty side for n = {n}"
        )));
    }
    let by_group: Vec<Vec<usize>> = (0..2u8)
        .map(|g| (0..n).filter(|&i| ds.groups()[i] == g).collect())
        .collect();
    let sizes: Vec<usize> = by_group.iter().map(Vec::len).collect();
    let quotas = apportion(n_test, &sizes);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test = Vec::with_capacity(n_test);
    for (rows, &q) in by_group.iter().zip(&quotas) {
        let mut rows = rows.clone();
        rows.shuffle(&mut rng);
        test.extend_from_slice(&rows[..q]);
    }
    test.sort_unstable();
    let mut in_test = vec![false; n];
    for &i in &test {
        in_test[i] = true;
    }
    let train: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
    Ok((ds.select_rows(&train), ds.select_rows(&test)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSpec {
    pub batch_size: usize,
    pub seed: u64,
}

/// Draws a mini-batch without replacement, stratified over the four (group, label)
/// cells. Every cell that is nonempty in `ds` gets at least one row.
pub fn sample_batch(ds: &TabularDataset, spec: BatchSpec) -> Result<TabularDataset> {
    let n = ds.n_rows();
    if spec.batch_size < 4 {
        return Err(Error::invalid(format!(
            "batch size {} is below the minimum of 4",
            spec.batch_size
        )));
    }
    if spec.batch_size > n {
        return Err(Error::invalid(format!(
            "batch size {} exceeds the {n} available rows",
            spec.batch_size
        )));
    }
    let cells: Vec<Vec<usize>> = (0..4)
        .map(|c| {
            (0..n)
                .filter(|&i| (ds.groups()[i] * 2 + ds.labels()[i]) as usize == c)
                .collect()
        })
        .collect();
    let sizes: Vec<usize> = cells.iter().map(Vec::len).collect();
    let mut quotas = apportion(spec.batch_size, &sizes);
    for c in 0..4 {
        if sizes[c] > 0 && quotas[c] == 0 {
            let donor = (0..4)
                .filter(|&k| quotas[k] > 1)
                .max_by_key(|&k| (quotas[k], std::cmp::Reverse(k)))
                .ok_or_else(|| Error::Internal("no donor cell for stratified batch".into()))?;
            quotas[donor] -= 1;
            quotas[c] = 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut rows = Vec::with_capacity(spec.batch_size);
    for (cell, &q) in cells.iter().zip(&quotas) {
        let mut cell = cell.clone();
        cell.shuffle(&mut rng);
        rows.extend_from_slice(&cell[..q]);
    }
    rows.shuffle(&mut rng);
    Ok(ds.select_rows(&rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceMode {
    /// Equal number of rows per group.
    Group,
    /// Equal number of rows per (group, label) cell.
    GroupLabel,
}

/// Down-samples to equal cell sizes; rows keep their original order.
pub fn balance(ds: &TabularDataset, mode: BalanceMode, seed: u64) -> Result<TabularDataset> {
    let n = ds.n_rows();
    let key = |i: usize| match mode {
        BalanceMode::Group => ds.groups()[i] as usize,
        BalanceMode::GroupLabel => (ds.groups()[i] * 2 + ds.labels()[i]) as usize,
    };
    let n_cells = match mode {
        BalanceMode::Group => 2,
        BalanceMode::GroupLabel => 4,
    };
    let cells: Vec<Vec<usize>> = (0..n_cells)
        .map(|c| (0..n).filter(|&i| key(i) == c).collect())
        .collect();
    let target = cells.iter().map(Vec::len).min().unwrap_or(0);
    if target == 0 {
        return Err(Error::invalid("cannot balance: a cell is empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = Vec::with_capacity(target * n_cells);
    for cell in &cells {
        let mut cell = cell.clone();
        cell.shuffle(&mut rng);
        keep.extend_from_slice(&cell[..target]);
    }
    keep.sort_unstable();
    Ok(ds.select_rows(&keep))
}

/// Largest-remainder apportionment of `total` across cells proportional to `sizes`.
/// Ties on the remainder go to the lower cell index.
fn apportion(total: usize, sizes: &[usize]) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    if n == 0 {
        return vec![0; sizes.len()];
    }
    let mut quotas: Vec<usize> = sizes.iter().map(|&s| total * s / n).collect();
    let mut rest = total - quotas.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    // remainder of total * s / n, compared exactly in integers
    order.sort_by_key(|&k| (std::cmp::Reverse(total * sizes[k] % n), k));
    for &k in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        if quotas[k] < sizes[k] {
            quotas[k] += 1;
            rest -= 1;
        }
    }
    quotas
}
