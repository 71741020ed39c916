//! Baseline imputers and the per-group imputation-error audit.
//!
//! Imputers are fitted on observed cells only and then applied to any dataset with the
//! same features. Fitting on training data and transforming test data reuses the
//! training statistics; refitting on the test set instead reproduces a train/test
//! imputation mismatch.

use serde::{Deserialize, Serialize};

use crate::dataset::TabularDataset;
use crate::{Error, Result};

/// Complete `n x d` matrix, row-major as nested rows.
pub type Matrix = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Imputer {
    /// Fixed fill value per feature.
    ConstantFill { values: Vec<f64> },
    /// Mean of the observed values of each feature.
    MeanFill,
    /// Mean of the observed values of each feature within the row's group.
    PerGroupMeanFill,
    /// Mean over the `k` nearest training rows (Euclidean on co-observed features).
    KnnFill { k: usize },
}

impl Default for Imputer {
    fn default() -> Self {
        Imputer::MeanFill
    }
}

impl Imputer {
    pub fn knn() -> Self {
        Imputer::KnnFill { k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedImputer {
    Constant(Vec<f64>),
    Mean(Vec<f64>),
    PerGroupMean([Vec<f64>; 2]),
    Knn {
        k: usize,
        train: TabularDataset,
        /// Column means, used when none of the neighbors observes a feature.
        fallback: Vec<f64>,
    },
}

fn column_mean(ds: &TabularDataset, j: usize, group: Option<u8>) -> Option<f64> {
    let (mut sum, mut count) = (0.0, 0usize);
    for i in 0..ds.n_rows() {
        if group.is_some_and(|g| ds.groups()[i] != g) {
            continue;
        }
        if let Some(v) = ds.get(i, j) {
            sum += v;
            count += 1;
        }
    }
    (count > 0).then(|| sum / count as f64)
}

fn means(ds: &TabularDataset, group: Option<u8>) -> Result<Vec<f64>> {
    (0..ds.n_features())
        .map(|j| {
            column_mean(ds, j, group).ok_or_else(|| {
                let name = &ds.feature_names()[j];
                Error::AllMissing(match group {
                    Some(g) => format!("{name} (group {g})"),
                    None => name.clone(),
                })
            })
        })
        .collect()
}

pub fn fit(imputer: &Imputer, ds: &TabularDataset) -> Result<FittedImputer> {
    match imputer {
        Imputer::ConstantFill { values } => {
            if values.len() != ds.n_features() {
                return Err(Error::DimensionMismatch {
                    expected: ds.n_features(),
                    got: values.len(),
                });
            }
            Ok(FittedImputer::Constant(values.clone()))
        }
        Imputer::MeanFill => Ok(FittedImputer::Mean(means(ds, None)?)),
        Imputer::PerGroupMeanFill => Ok(FittedImputer::PerGroupMean([
            means(ds, Some(0))?,
            means(ds, Some(1))?,
        ])),
        Imputer::KnnFill { k } => {
            if *k == 0 {
                return Err(Error::invalid("k-NN imputation needs k >= 1"));
            }
            Ok(FittedImputer::Knn {
                k: *k,
                fallback: means(ds, None)?,
                train: ds.clone(),
            })
        }
    }
}

impl FittedImputer {
    fn n_features(&self) -> usize {
        match self {
            FittedImputer::Constant(v) | FittedImputer::Mean(v) => v.len(),
            FittedImputer::PerGroupMean(v) => v[0].len(),
            FittedImputer::Knn { fallback, .. } => fallback.len(),
        }
    }

    /// Fills every masked cell; observed cells pass through unchanged.
    pub fn transform(&self, ds: &TabularDataset) -> Result<Matrix> {
        if ds.n_features() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: ds.n_features(),
            });
        }
        (0..ds.n_rows())
            .map(|i| {
                let mut row: Vec<f64> = (0..ds.n_features())
                    .map(|j| ds.get(i, j).unwrap_or(f64::NAN))
                    .collect();
                let missing: Vec<usize> = (0..row.len()).filter(|&j| ds.is_missing(i, j)).collect();
                if missing.is_empty() {
                    return Ok(row);
                }
                match self {
                    FittedImputer::Constant(v) | FittedImputer::Mean(v) => {
                        for &j in &missing {
                            row[j] = v[j];
                        }
                    }
                    FittedImputer::PerGroupMean(v) => {
                        let g = ds.groups()[i] as usize;
                        for &j in &missing {
                            row[j] = v[g][j];
                        }
                    }
                    FittedImputer::Knn { k, train, fallback } => {
                        knn_fill(i, ds, *k, train, fallback, &missing, &mut row)?;
                    }
                }
                Ok(row)
            })
            .collect()
    }
}

/// Fills `missing` coordinates of query row `i` from one shared neighbor set.
///
/// Candidate neighbors observe at least one of the query's missing features and share
/// at least one observed feature with it (a query with nothing observed is equidistant
/// from every training row). Ties in distance go to the lower training row index.
fn knn_fill(
    i: usize,
    ds: &TabularDataset,
    k: usize,
    train: &TabularDataset,
    fallback: &[f64],
    missing: &[usize],
    row: &mut [f64],
) -> Result<()> {
    let d = ds.n_features();
    let query_observed: Vec<usize> = (0..d).filter(|&j| !ds.is_missing(i, j)).collect();
    let mut candidates: Vec<(f64, usize)> = Vec::new();
    let mut any_co_observed = query_observed.is_empty();
    for t in 0..train.n_rows() {
        let mut sq = 0.0;
        let mut shared = 0;
        for &j in &query_observed {
            if let Some(v) = train.get(t, j) {
                let diff = v - row[j];
                sq += diff * diff;
                shared += 1;
            }
        }
        if shared == 0 && !query_observed.is_empty() {
            continue;
        }
        any_co_observed = true;
        if missing.iter().any(|&j| !train.is_missing(t, j)) {
            candidates.push((sq.sqrt(), t));
        }
    }
    if !any_co_observed {
        return Err(Error::NoCoObserved(i));
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    candidates.truncate(k);
    for &j in missing {
        let vals: Vec<f64> = candidates
            .iter()
            .filter_map(|&(_, t)| train.get(t, j))
            .collect();
        row[j] = if vals.is_empty() {
            fallback[j]
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        };
    }
    Ok(())
}

/// Per-group imputation error and its gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImputationDisc {
    pub l0: f64,
    pub l1: f64,
    pub disc: f64,
}

/// Mean squared error over the masked cells of each group, against the complete `truth`.
pub fn imputer_disc(
    f: &FittedImputer,
    truth: &[Vec<f64>],
    mask: &[Vec<bool>],
    groups: &[u8],
) -> Result<ImputationDisc> {
    let n = truth.len();
    if mask.len() != n || groups.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: mask.len().min(groups.len()),
        });
    }
    let d = f.n_features();
    let mut values = Vec::with_capacity(n * d);
    let mut flat_mask = Vec::with_capacity(n * d);
    for (row, m) in truth.iter().zip(mask) {
        if row.len() != d || m.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: row.len(),
            });
        }
        values.extend_from_slice(row);
        flat_mask.extend_from_slice(m);
    }
    let names = (0..d).map(|j| format!("x{j}")).collect();
    let ds = TabularDataset::new(values, flat_mask, vec![0; n], groups.to_vec(), names)?;
    let filled = f.transform(&ds)?;

    let mut sums = [0.0; 2];
    let mut counts = [0usize; 2];
    for i in 0..n {
        let g = usize::from(groups[i] != 0);
        for j in 0..d {
            if mask[i][j] {
                let e = filled[i][j] - truth[i][j];
                sums[g] += e * e;
                counts[g] += 1;
            }
        }
    }
    let l = |g: usize| {
        if counts[g] == 0 {
            Err(Error::invalid(format!("group {g} has no masked cells")))
        } else {
            Ok(sums[g] / counts[g] as f64)
        }
    };
    let (l0, l1) = (l(0)?, l(1)?);
    Ok(ImputationDisc {
        l0,
        l1,
        disc: (l0 - l1).abs(),
    })
}

/// Missing-data statistics of a single feature with no other observed variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Inputs {
    /// `Pr(S = 0 | M = 1)`
    pub p0_ms: f64,
    /// `Pr(S = 1 | M = 1)`
    pub p1_ms: f64,
    pub m0: f64,
    pub m1: f64,
    pub var0: f64,
    pub var1: f64,
}

impl Theorem1Inputs {
    pub fn validate(&self) -> Result<()> {
        check_missing_probs(self.p0_ms, self.p1_ms)?;
        if self.var0 < 0.0 || self.var1 < 0.0 {
            return Err(Error::invalid("variances must be nonnegative"));
        }
        Ok(())
    }
}

fn check_missing_probs(p0: f64, p1: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p0) || !(0.0..=1.0).contains(&p1) || (p0 + p1 - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "missing-group probabilities ({p0}, {p1}) must lie in [0, 1] and sum to 1"
        )));
    }
    Ok(())
}

/// L2-optimal constant fill when nothing else is observed: `p0 * m0 + p1 * m1`.
pub fn optimal_constant(p0_ms: f64, p1_ms: f64, m0: f64, m1: f64) -> Result<f64> {
    check_missing_probs(p0_ms, p1_ms)?;
    Ok(p0_ms * m0 + p1_ms * m1)
}

/// Closed-form discrimination risk of the optimal constant imputer:
/// `|(p1 - p0)(m1 - m0)^2 + (var0 - var1)|`.
pub fn theorem1_disc(t: &Theorem1Inputs) -> Result<f64> {
    t.validate()?;
    let gap = t.m1 - t.m0;
    Ok(((t.p1_ms - t.p0_ms) * gap * gap + (t.var0 - t.var1)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_col(cells: &[Option<f64>], groups: Vec<u8>) -> TabularDataset {
        let rows: Vec<_> = cells.iter().map(|c| vec![*c]).collect();
        let n = rows.len();
        TabularDataset::from_rows(&rows, vec![0; n], groups, vec!["x".into()]).unwrap()
    }

    #[test]
    fn mean_fill_uses_observed_cells() {
        let ds = one_col(&[Some(1.0), Some(2.0), None, Some(3.0)], vec![0, 0, 1, 1]);
        let f = fit(&Imputer::MeanFill, &ds).unwrap();
        assert_eq!(f, FittedImputer::Mean(vec![2.0]));
        assert_eq!(f.transform(&ds).unwrap()[2], vec![2.0]);
    }

    #[test]
    fn per_group_means() {
        let ds = one_col(&[Some(0.0), Some(2.0), Some(4.0), None], vec![0, 0, 1, 1]);
        let f = fit(&Imputer::PerGroupMeanFill, &ds).unwrap();
        assert_eq!(f, FittedImputer::PerGroupMean([vec![1.0], vec![4.0]]));
        let out = f.transform(&ds).unwrap();
        assert_eq!(out[3], vec![4.0]);
    }

    #[test]
    fn all_missing_feature_cannot_be_fitted() {
        let ds = one_col(&[None, None], vec![0, 1]);
        assert!(matches!(
            fit(&Imputer::KnnFill { k: 1 }, &ds),
            Err(Error::AllMissing(_))
        ));
        let ds = one_col(&[Some(1.0), None], vec![0, 1]);
        assert!(fit(&Imputer::PerGroupMeanFill, &ds).is_err());
    }

    #[test]
    fn complete_input_passes_through() {
        let ds = one_col(&[Some(0.3), Some(0.7)], vec![0, 1]);
        for imp in [Imputer::MeanFill, Imputer::knn(), Imputer::PerGroupMeanFill] {
            let f = fit(&imp, &ds).unwrap();
            assert_eq!(f.transform(&ds).unwrap(), vec![vec![0.3], vec![0.7]]);
        }
    }

    fn two_col(rows: &[[Option<f64>; 2]]) -> TabularDataset {
        let rows: Vec<Vec<_>> = rows.iter().map(|r| r.to_vec()).collect();
        let n = rows.len();
        TabularDataset::from_rows(&rows, vec![0; n], vec![0; n], vec!["a".into(), "f".into()])
            .unwrap()
    }

    #[test]
    fn knn_duplicate_row_is_nearest() {
        let train = two_col(&[[Some(0.2), Some(5.0)], [Some(0.9), Some(7.0)]]);
        let f = fit(&Imputer::KnnFill { k: 1 }, &train).unwrap();
        let q = two_col(&[[Some(0.2), None]]);
        assert_eq!(f.transform(&q).unwrap()[0], vec![0.2, 5.0]);
    }

    #[test]
    fn knn_two_nearest_average() {
        // training rows at distances 0.1, 0.2, 5 from the query with f = 0, 1, 10
        let train = two_col(&[[Some(0.1), Some(0.0)], [Some(0.2), Some(1.0)], [Some(5.0), Some(10.0)]]);
        let f = fit(&Imputer::KnnFill { k: 2 }, &train).unwrap();
        let q = two_col(&[[Some(0.0), None]]);
        assert_eq!(f.transform(&q).unwrap()[0][1], 0.5);
    }

    fn ab(rows: &[Vec<Option<f64>>]) -> TabularDataset {
        let n = rows.len();
        TabularDataset::from_rows(rows, vec![0; n], vec![0; n], vec!["a".into(), "f".into()])
            .unwrap()
    }

    #[test]
    fn knn_without_co_observed_feature_fails() {
        let train = ab(&[vec![None, Some(1.0)], vec![None, Some(2.0)]]);
        let f = FittedImputer::Knn { k: 1, train, fallback: vec![0.0, 1.5] };
        let q = ab(&[vec![Some(1.0), None]]);
        assert!(matches!(f.transform(&q), Err(Error::NoCoObserved(0))));
    }

    #[test]
    fn knn_falls_back_to_column_mean() {
        // the only row co-observing `f` lacks `a`
        let train = ab(&[vec![None, Some(1.0)], vec![Some(2.0), None]]);
        let f = fit(&Imputer::KnnFill { k: 1 }, &train).unwrap();
        let q = ab(&[vec![None, Some(3.0)]]);
        assert_eq!(f.transform(&q).unwrap()[0], vec![2.0, 3.0]);
    }

    #[test]
    fn knn_with_k_n_is_mean_fill() {
        let ds = one_col(&[Some(0.1), Some(0.4), Some(0.9), Some(0.2)], vec![0, 1, 0, 1]);
        let q = one_col(&[None, Some(0.5)], vec![0, 1]);
        let knn = fit(&Imputer::KnnFill { k: 4 }, &ds).unwrap().transform(&q).unwrap();
        let mean = fit(&Imputer::MeanFill, &ds).unwrap().transform(&q).unwrap();
        assert_eq!(knn, mean);
    }

    #[test]
    fn imputer_disc_examples() {
        // group 0 errors {1, 1}, group 1 errors {0, 2} around a constant fill of 0
        let f = FittedImputer::Constant(vec![0.0]);
        let truth = vec![vec![1.0], vec![-1.0], vec![0.0], vec![2.0]];
        let mask = vec![vec![true]; 4];
        let r = imputer_disc(&f, &truth, &mask, &[0, 0, 1, 1]).unwrap();
        assert_eq!((r.l0, r.l1, r.disc), (1.0, 2.0, 1.0));

        let perfect = FittedImputer::PerGroupMean([vec![0.0], vec![1.0]]);
        let truth = vec![vec![0.0], vec![1.0]];
        let r = imputer_disc(&perfect, &truth, &[vec![true], vec![true]], &[0, 1]).unwrap();
        assert_eq!((r.l0, r.l1, r.disc), (0.0, 0.0, 0.0));

        assert!(imputer_disc(&f, &truth, &[vec![true], vec![false]], &[0, 1]).is_err());
    }

    #[test]
    fn optimal_constant_examples() {
        assert_eq!(optimal_constant(0.4, 0.6, 2.5, 2.5).unwrap(), 2.5);
        assert_eq!(optimal_constant(1.0, 0.0, 3.0, 7.0).unwrap(), 3.0);
        assert_eq!(optimal_constant(0.25, 0.75, 0.0, 1.0).unwrap(), 0.75);
        assert!(optimal_constant(0.5, 0.6, 0.0, 1.0).is_err());
    }

    #[test]
    fn optimal_constant_matches_grid_search() {
        // E[(a - X)^2 | M = 1] on the two-point mixture {0 w.p. 0.25, 1 w.p. 0.75}
        let risk = |a: f64| 0.25 * a * a + 0.75 * (a - 1.0) * (a - 1.0);
        let best = (0..=10_000)
            .map(|k| k as f64 / 10_000.0)
            .min_by(|a, b| risk(*a).total_cmp(&risk(*b)))
            .unwrap();
        assert!((best - optimal_constant(0.25, 0.75, 0.0, 1.0).unwrap()).abs() <= 1e-4);
    }

    #[test]
    fn theorem1_examples() {
        let t = |p0: f64, m0, m1, v0, v1| Theorem1Inputs {
            p0_ms: p0,
            p1_ms: 1.0 - p0,
            m0,
            m1,
            var0: v0,
            var1: v1,
        };
        assert_eq!(theorem1_disc(&t(0.3, 1.0, 1.0, 2.0, 2.0)).unwrap(), 0.0);
        assert_eq!(theorem1_disc(&t(0.5, 0.0, 3.0, 1.0, 1.0)).unwrap(), 0.0);
        let v = theorem1_disc(&t(0.3, 0.0, 1.0, 1.0, 2.0)).unwrap();
        assert!((v - 0.6).abs() < 1e-15, "{v}");
    }
}
