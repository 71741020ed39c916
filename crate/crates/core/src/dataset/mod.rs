//! Tabular data with an explicit missingness mask.
//!
//! A [`TabularDataset`] holds `n` rows of `d` real features, a parallel boolean mask
//! (`true` = missing), a binary label and a binary group attribute. Masked cells carry
//! no meaningful value and are never read by any consumer in this crate.

mod io;
mod sampling;
pub mod synthetic;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use io::{load_csv, load_feature_matrix, write_csv, CsvLoad, CsvOptions, Encoding, RawTable};
pub use sampling::{
    balance, inject_missingness, sample_batch, train_test_split, BalanceMode, BatchSpec,
    MissingnessEntry, MissingnessSpec,
};

/// Per-feature `(min, max)` of the observed values before min-max scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScale {
    pub min: f64,
    pub max: f64,
}

impl FeatureScale {
    pub fn apply(&self, x: f64) -> f64 {
        let span = self.max - self.min;
        if span > 0.0 {
            ((x - self.min) / span).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    pub fn invert(&self, x: f64) -> f64 {
        self.min + x * (self.max - self.min)
    }
}

#[derive(Debug, Clone)]
pub struct TabularDataset {
    values: Vec<f64>,
    mask: Vec<bool>,
    labels: Vec<u8>,
    groups: Vec<u8>,
    feature_names: Vec<String>,
    scaling: Option<Vec<FeatureScale>>,
}

/// Equality ignores the placeholder values of masked cells.
impl PartialEq for TabularDataset {
    fn eq(&self, other: &Self) -> bool {
        self.mask == other.mask
            && self.labels == other.labels
            && self.groups == other.groups
            && self.feature_names == other.feature_names
            && self.scaling == other.scaling
            && self
                .values
                .iter()
                .zip(&other.values)
                .zip(&self.mask)
                .all(|((a, b), &m)| m || a == b)
    }
}

impl TabularDataset {
    /// Builds a dataset from row-major `values`/`mask` of shape `n x feature_names.len()`.
    ///
    /// Masked cells are normalized to `NaN` so that accidental reads are visible.
    pub fn new(
        mut values: Vec<f64>,
        mask: Vec<bool>,
        labels: Vec<u8>,
        groups: Vec<u8>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = labels.len();
        let d = feature_names.len();
        if groups.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: groups.len(),
            });
        }
        for buf_len in [values.len(), mask.len()] {
            if buf_len != n * d {
                return Err(Error::DimensionMismatch {
                    expected: n * d,
                    got: buf_len,
                });
            }
        }
        if let Some(bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::NonBinary {
                column: "label".into(),
                detail: format!("value {bad}"),
            });
        }
        if let Some(bad) = groups.iter().find(|&&s| s > 1) {
            return Err(Error::NonBinary {
                column: "group".into(),
                detail: format!("value {bad}"),
            });
        }
        for (v, &m) in values.iter_mut().zip(&mask) {
            if m {
                *v = f64::NAN;
            } else if !v.is_finite() {
                return Err(Error::Parse(format!("non-finite observed value {v}")));
            }
        }
        Ok(Self {
            values,
            mask,
            labels,
            groups,
            feature_names,
            scaling: None,
        })
    }

    /// Convenience constructor from per-row `Option` cells (`None` = missing).
    pub fn from_rows(
        rows: &[Vec<Option<f64>>],
        labels: Vec<u8>,
        groups: Vec<u8>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let d = feature_names.len();
        let mut values = Vec::with_capacity(rows.len() * d);
        let mut mask = Vec::with_capacity(rows.len() * d);
        for row in rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            for cell in row {
                values.push(cell.unwrap_or(f64::NAN));
                mask.push(cell.is_none());
            }
        }
        Self::new(values, mask, labels, groups, feature_names)
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|f| f == name)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn groups(&self) -> &[u8] {
        &self.groups
    }

    pub fn scaling(&self) -> Option<&[FeatureScale]> {
        self.scaling.as_deref()
    }

    /// Observed value of cell `(row, feature)`, `None` when masked.
    pub fn get(&self, row: usize, feature: usize) -> Option<f64> {
        let k = row * self.n_features() + feature;
        if self.mask[k] {
            None
        } else {
            Some(self.values[k])
        }
    }

    pub fn is_missing(&self, row: usize, feature: usize) -> bool {
        self.mask[row * self.n_features() + feature]
    }

    /// Raw value slice of one row; masked entries are `NaN`.
    pub fn row_values(&self, row: usize) -> &[f64] {
        let d = self.n_features();
        &self.values[row * d..(row + 1) * d]
    }

    pub fn row_mask(&self, row: usize) -> &[bool] {
        let d = self.n_features();
        &self.mask[row * d..(row + 1) * d]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn count_missing(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn group_size(&self, group: u8) -> usize {
        self.groups.iter().filter(|&&s| s == group).count()
    }

    /// True when every observed value lies in `[0, 1]`.
    pub fn is_unit_scaled(&self) -> bool {
        self.values
            .iter()
            .zip(&self.mask)
            .all(|(&v, &m)| m || (0.0..=1.0).contains(&v))
    }

    /// New dataset made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> TabularDataset {
        let d = self.n_features();
        let mut values = Vec::with_capacity(rows.len() * d);
        let mut mask = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            values.extend_from_slice(self.row_values(r));
            mask.extend_from_slice(self.row_mask(r));
        }
        TabularDataset {
            values,
            mask,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            groups: rows.iter().map(|&r| self.groups[r]).collect(),
            feature_names: self.feature_names.clone(),
            scaling: self.scaling.clone(),
        }
    }

    pub(crate) fn with_mask(&self, mask: Vec<bool>) -> TabularDataset {
        debug_assert_eq!(mask.len(), self.mask.len());
        let values = self
            .values
            .iter()
            .zip(&mask)
            .map(|(&v, &m)| if m { f64::NAN } else { v })
            .collect();
        TabularDataset {
            values,
            mask,
            ..self.clone()
        }
    }

    /// Min-max scales each feature to `[0, 1]` using observed values only.
    ///
    /// Constant (or fully missing) features map to 0 with scale `(c, c)`.
    pub fn scale_unit_interval(&self) -> Result<TabularDataset> {
        if self.scaling.is_some() {
            return Err(Error::invalid("dataset is already scaled"));
        }
        let d = self.n_features();
        let mut scales = Vec::with_capacity(d);
        for j in 0..d {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for i in 0..self.n_rows() {
                if let Some(v) = self.get(i, j) {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            if !lo.is_finite() {
                // no observed values: any scale works, none will be read
                lo = 0.0;
                hi = 0.0;
            }
            scales.push(FeatureScale { min: lo, max: hi });
        }
        let mut out = self.apply_scaling(&scales)?;
        out.scaling = Some(scales);
        Ok(out)
    }

    /// Scales with externally fitted `(min, max)` pairs (e.g. a model's training scale).
    ///
    /// Values outside the fitted range are clamped to `[0, 1]`.
    pub fn apply_scaling(&self, scales: &[FeatureScale]) -> Result<TabularDataset> {
        let d = self.n_features();
        if scales.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: scales.len(),
            });
        }
        let values = self
            .values
            .iter()
            .zip(&self.mask)
            .enumerate()
            .map(|(k, (&v, &m))| if m { f64::NAN } else { scales[k % d].apply(v) })
            .collect();
        Ok(TabularDataset {
            values,
            scaling: Some(scales.to_vec()),
            ..self.clone()
        })
    }

    /// Maps scaled observed values back to the original units.
    pub fn unscale(&self) -> Result<TabularDataset> {
        let scales = self
            .scaling
            .as_ref()
            .ok_or_else(|| Error::invalid("dataset is not scaled"))?;
        let d = self.n_features();
        let values = self
            .values
            .iter()
            .zip(&self.mask)
            .enumerate()
            .map(|(k, (&v, &m))| if m { f64::NAN } else { scales[k % d].invert(v) })
            .collect();
        Ok(TabularDataset {
            values,
            scaling: None,
            ..self.clone()
        })
    }

    /// Per-feature, per-group missing rates with normal-approximation standard errors.
    pub fn missingness_report(&self) -> MissingnessReport {
        let sizes = [self.group_size(0), self.group_size(1)];
        let rows = self
            .feature_names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let mut counts = [0usize; 2];
                for i in 0..self.n_rows() {
                    if self.is_missing(i, j) {
                        counts[self.groups[i] as usize] += 1;
                    }
                }
                let cell = |g: usize| {
                    let n = sizes[g];
                    let rate = if n == 0 {
                        0.0
                    } else {
                        counts[g] as f64 / n as f64
                    };
                    let se = if n == 0 {
                        0.0
                    } else {
                        (rate * (1.0 - rate) / n as f64).sqrt()
                    };
                    GroupMissing {
                        missing: counts[g],
                        size: n,
                        rate,
                        se,
                    }
                };
                FeatureMissing {
                    feature: name.clone(),
                    group0: cell(0),
                    group1: cell(1),
                }
            })
            .collect();
        MissingnessReport { features: rows }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMissing {
    pub missing: usize,
    pub size: usize,
    pub rate: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMissing {
    pub feature: String,
    pub group0: GroupMissing,
    pub group1: GroupMissing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingnessReport {
    pub features: Vec<FeatureMissing>,
}

impl MissingnessReport {
    pub fn feature(&self, name: &str) -> Option<&FeatureMissing> {
        self.features.iter().find(|f| f.feature == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,group,missing,size,rate,se\n");
        for f in &self.features {
            for (g, cell) in [(0, &f.group0), (1, &f.group1)] {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    f.feature, g, cell.missing, cell.size, cell.rate, cell.se
                ));
            }
        }
        out
    }
}
