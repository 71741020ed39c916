//! Fixed-depth MIA trees and the branch-and-bound solver that fits them.
//!
//! Nodes are stored in heap order: branch `v` has children `2v + 1` and `2v + 2`, and
//! node indices at or beyond the branch count are leaves numbered left to right.

mod solver;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::dataset::TabularDataset;
use crate::metrics::{ConfusionByGroup, FairnessMetric};
use crate::{Error, Result};

pub use solver::{solve, NodeOrder, SolveResult, SolverConfig};

/// Threshold below every scaled value: the branch separates missing from observed.
pub const SENTINEL: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub feature: usize,
    pub threshold: f64,
    pub missing_left: bool,
}

impl Branch {
    /// Whether a cell goes to the left child: missing cells follow `missing_left`,
    /// observed ones go left iff `value <= threshold`.
    #[inline]
    pub fn goes_left(&self, value: f64, missing: bool) -> bool {
        if missing {
            self.missing_left
        } else {
            value <= self.threshold
        }
    }

    /// Total order used for tie-breaking: feature, then threshold, then direction.
    pub fn lex_cmp(&self, other: &Branch) -> Ordering {
        self.feature
            .cmp(&other.feature)
            .then(self.threshold.total_cmp(&other.threshold))
            .then(self.missing_left.cmp(&other.missing_left))
    }
}

pub(crate) fn lex_cmp_seq(a: &[Branch], b: &[Branch]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.lex_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiaTree {
    pub depth: usize,
    pub branches: Vec<Branch>,
    pub leaves: Vec<u8>,
    #[serde(default)]
    pub feature_names: Vec<String>,
}

pub fn n_branches(depth: usize) -> usize {
    (1usize << depth) - 1
}

pub fn n_leaves(depth: usize) -> usize {
    1usize << depth
}

impl MiaTree {
    pub fn new(depth: usize, branches: Vec<Branch>, leaves: Vec<u8>, feature_names: Vec<String>) -> Result<Self> {
        let tree = MiaTree { depth, branches, leaves, feature_names };
        tree.check_shape()?;
        Ok(tree)
    }

    fn check_shape(&self) -> Result<()> {
        if self.depth == 0 || self.depth > 16 {
            return Err(Error::invalid(format!("tree depth {} outside 1..=16", self.depth)));
        }
        if self.branches.len() != n_branches(self.depth) {
            return Err(Error::DimensionMismatch {
                expected: n_branches(self.depth),
                got: self.branches.len(),
            });
        }
        if self.leaves.len() != n_leaves(self.depth) {
            return Err(Error::DimensionMismatch {
                expected: n_leaves(self.depth),
                got: self.leaves.len(),
            });
        }
        if self.leaves.iter().any(|&u| u > 1) {
            return Err(Error::invalid("leaf labels must be 0 or 1"));
        }
        if self.branches.iter().any(|b| !b.threshold.is_finite()) {
            return Err(Error::invalid("thresholds must be finite"));
        }
        Ok(())
    }

    /// Checks the shape and that every split feature exists in a `d`-feature input.
    pub fn validate(&self, d: usize) -> Result<()> {
        self.check_shape()?;
        if let Some(b) = self.branches.iter().find(|b| b.feature >= d) {
            return Err(Error::DimensionMismatch { expected: d, got: b.feature + 1 });
        }
        Ok(())
    }

    /// Leaf reached by a row, without bounds checks on the feature indices.
    #[inline]
    pub(crate) fn route_unchecked(&self, values: &[f64], mask: &[bool]) -> usize {
        let nb = self.branches.len();
        let mut v = 0;
        while v < nb {
            let b = &self.branches[v];
            v = if b.goes_left(values[b.feature], mask[b.feature]) { 2 * v + 1 } else { 2 * v + 2 };
        }
        v - nb
    }

    pub fn predict_row(&self, values: &[f64], mask: &[bool]) -> Result<u8> {
        Ok(self.leaves[route(self, values, mask)?])
    }

    pub fn predict(&self, ds: &TabularDataset) -> Result<Vec<u8>> {
        self.validate(ds.n_features())?;
        Ok((0..ds.n_rows())
            .map(|i| self.leaves[self.route_unchecked(ds.row_values(i), ds.row_mask(i))])
            .collect())
    }
}

/// Leaf index (left to right) reached by one row.
pub fn route(tree: &MiaTree, values: &[f64], mask: &[bool]) -> Result<usize> {
    if values.len() != mask.len() {
        return Err(Error::DimensionMismatch { expected: values.len(), got: mask.len() });
    }
    tree.validate(values.len())?;
    Ok(tree.route_unchecked(values, mask))
}

/// Majority label with ties to 1; an empty leaf is labeled 1.
#[inline]
pub fn majority_label(positives: usize, negatives: usize) -> u8 {
    u8::from(positives >= negatives)
}

/// Relabels every leaf by majority vote over the batch rows routed to it.
pub fn fit_leaves(tree: &MiaTree, batch: &TabularDataset) -> Result<MiaTree> {
    tree.validate(batch.n_features())?;
    let mut counts = vec![[0usize; 2]; tree.leaves.len()];
    for i in 0..batch.n_rows() {
        let leaf = tree.route_unchecked(batch.row_values(i), batch.row_mask(i));
        counts[leaf][batch.labels()[i] as usize] += 1;
    }
    let mut out = tree.clone();
    out.leaves = counts.iter().map(|c| majority_label(c[1], c[0])).collect();
    Ok(out)
}

/// `errors / n + lambda * fairness(metric)` of the tree's predictions on the batch.
pub fn evaluate_objective(
    tree: &MiaTree,
    batch: &TabularDataset,
    lambda: f64,
    metric: FairnessMetric,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let preds = tree.predict(batch)?;
    let conf = ConfusionByGroup::from_predictions(&preds, batch.labels(), batch.groups())?;
    Ok(objective_from_confusion(&conf, batch.n_rows(), lambda, metric))
}

/// Shared by the solver and [`evaluate_objective`] so both produce identical floats.
pub(crate) fn objective_from_confusion(
    conf: &ConfusionByGroup,
    n: usize,
    lambda: f64,
    metric: FairnessMetric,
) -> f64 {
    let errors: usize = conf.groups.iter().map(|c| c.fp + c.fn_).sum();
    let risk = errors as f64 / n as f64;
    if lambda == 0.0 {
        risk
    } else {
        risk + lambda * conf.fairness(metric)
    }
}

/// A split rule for one feature, before it is placed at a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub threshold: f64,
    pub missing_left: bool,
}

/// Thresholds worth trying for `feature`: the sentinel, then the midpoints between
/// consecutive distinct observed values. Each threshold comes with both missing
/// directions when the feature has missing cells in the batch, otherwise with
/// `missing_left = false` only.
pub fn enumerate_candidates(batch: &TabularDataset, feature: usize) -> Result<Vec<Candidate>> {
    if feature >= batch.n_features() {
        return Err(Error::DimensionMismatch { expected: batch.n_features(), got: feature + 1 });
    }
    let mut observed: Vec<f64> = (0..batch.n_rows()).filter_map(|i| batch.get(i, feature)).collect();
    let has_missing = observed.len() < batch.n_rows();
    observed.sort_by(f64::total_cmp);
    observed.dedup();
    let mut thresholds = vec![SENTINEL];
    thresholds.extend(observed.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    let directions: &[bool] = if has_missing { &[false, true] } else { &[false] };
    Ok(thresholds
        .into_iter()
        .flat_map(|threshold| {
            directions.iter().map(move |&missing_left| Candidate { threshold, missing_left })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn branch(feature: usize, threshold: f64, missing_left: bool) -> Branch {
        Branch { feature, threshold, missing_left }
    }

    #[test]
    fn depth_two_example_routes_to_last_leaf() {
        // root splits the third feature, its right child the (missing) fourth
        let tree = MiaTree::new(
            2,
            vec![branch(2, 1.0, true), branch(0, 0.0, true), branch(3, 0.5, false)],
            vec![1, 0, 1, 0],
            vec![],
        )
        .unwrap();
        let values = [-5.0, 100.0, 2.2, f64::NAN];
        let mask = [false, false, false, true];
        assert_eq!(route(&tree, &values, &mask).unwrap(), 3);
        assert_eq!(tree.predict_row(&values, &mask).unwrap(), 0);
    }

    #[test]
    fn sentinel_splits_missing_from_observed() {
        let tree = MiaTree::new(1, vec![branch(0, SENTINEL, true)], vec![0, 1], vec![]).unwrap();
        assert_eq!(route(&tree, &[f64::NAN], &[true]).unwrap(), 0);
        for v in [0.0, 0.5, 1.0] {
            assert_eq!(route(&tree, &[v], &[false]).unwrap(), 1);
        }
    }

    #[test]
    fn boundary_goes_left() {
        let tree = MiaTree::new(1, vec![branch(0, 0.35, false)], vec![0, 1], vec![]).unwrap();
        assert_eq!(route(&tree, &[0.35], &[false]).unwrap(), 0);
        assert!(route(&tree, &[0.35, 1.0], &[false]).is_err());
        let wide = MiaTree::new(1, vec![branch(2, 0.35, false)], vec![0, 1], vec![]).unwrap();
        assert!(route(&wide, &[0.35], &[false]).is_err());
    }

    fn batch(cells: &[Option<f64>], labels: Vec<u8>, groups: Vec<u8>) -> TabularDataset {
        let rows: Vec<_> = cells.iter().map(|c| vec![*c]).collect();
        TabularDataset::from_rows(&rows, labels, groups, vec!["x".into()]).unwrap()
    }

    #[test]
    fn leaf_majorities() {
        let stump = MiaTree::new(1, vec![branch(0, 0.5, true)], vec![0, 0], vec![]).unwrap();
        // left gets {1, 1, 0}, right gets {1, 0}
        let b = batch(
            &[Some(0.1), Some(0.2), None, Some(0.7), Some(0.9)],
            vec![1, 1, 0, 1, 0],
            vec![0, 1, 0, 1, 0],
        );
        assert_eq!(fit_leaves(&stump, &b).unwrap().leaves, vec![1, 1]);
        // right leaf empty
        let b = batch(&[Some(0.1), Some(0.2)], vec![0, 0], vec![0, 1]);
        assert_eq!(fit_leaves(&stump, &b).unwrap().leaves, vec![0, 1]);
    }

    #[test]
    fn objective_on_four_points() {
        // values [0.1, *, 0.6, 0.9], groups [0,0,1,1], labels [1,0,0,1]
        let b = batch(&[Some(0.1), None, Some(0.6), Some(0.9)], vec![1, 0, 0, 1], vec![0, 0, 1, 1]);
        let stump = MiaTree::new(1, vec![branch(0, 0.35, false)], vec![0, 0], vec![]).unwrap();
        let tree = fit_leaves(&stump, &b).unwrap();
        // left {0.1 -> y1}, right {*, 0.6, 0.9 -> y0, y0, y1}
        assert_eq!(tree.leaves, vec![1, 0]);
        assert_eq!(tree.predict(&b).unwrap(), vec![1, 0, 0, 0]);
        let err = evaluate_objective(&tree, &b, 0.0, FairnessMetric::FnrDiff).unwrap();
        assert_eq!(err, 0.25);
        // fnr: group 0 has no false negatives, group 1 misses its only positive
        let obj = evaluate_objective(&tree, &b, 0.5, FairnessMetric::FnrDiff).unwrap();
        assert_eq!(obj, 0.25 + 0.5);
    }

    #[test]
    fn candidates() {
        let b = batch(&[Some(0.2), Some(0.4), Some(0.4), Some(1.0)], vec![0; 4], vec![0, 1, 0, 1]);
        let c = enumerate_candidates(&b, 0).unwrap();
        let th: Vec<f64> = c.iter().map(|c| c.threshold).collect();
        assert_eq!(th.len(), 3);
        assert_eq!(th[0], SENTINEL);
        assert!((th[1] - 0.3).abs() < 1e-15 && (th[2] - 0.7).abs() < 1e-15);
        assert!(c.iter().all(|c| !c.missing_left));

        let b = batch(&[None, None], vec![0, 1], vec![0, 1]);
        let c = enumerate_candidates(&b, 0).unwrap();
        assert_eq!(
            c,
            vec![
                Candidate { threshold: SENTINEL, missing_left: false },
                Candidate { threshold: SENTINEL, missing_left: true }
            ]
        );
        assert!(enumerate_candidates(&b, 1).is_err());
    }

    #[test]
    fn lex_order() {
        let a = branch(0, 0.5, true);
        assert_eq!(a.lex_cmp(&branch(1, 0.1, false)), Ordering::Less);
        assert_eq!(a.lex_cmp(&branch(0, 0.6, false)), Ordering::Less);
        assert_eq!(a.lex_cmp(&branch(0, 0.5, false)), Ordering::Greater);
        assert_eq!(lex_cmp_seq(&[a, a], &[a, branch(0, SENTINEL, false)]), Ordering::Greater);
    }
}
