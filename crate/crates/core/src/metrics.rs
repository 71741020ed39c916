//! Group-conditional risks, confusion-matrix fairness gaps and total variation.
//!
//! Rates with an empty denominator (e.g. the FPR of a group without negatives) are
//! taken as 0 and reported through `log::debug!`, so batch-level training never aborts
//! on a degenerate cell.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FairnessMetric {
    /// `|err_0 - err_1|`
    AccuracyDiff,
    /// `|fpr_0 - fpr_1|`
    FprDiff,
    /// `|fnr_0 - fnr_1|`
    FnrDiff,
    /// FPR gap plus FNR gap.
    EqualizedOdds,
}

impl FairnessMetric {
    pub const ALL: [FairnessMetric; 4] = [
        FairnessMetric::AccuracyDiff,
        FairnessMetric::FprDiff,
        FairnessMetric::FnrDiff,
        FairnessMetric::EqualizedOdds,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FairnessMetric::AccuracyDiff => "accuracy_diff",
            FairnessMetric::FprDiff => "fpr_diff",
            FairnessMetric::FnrDiff => "fnr_diff",
            FairnessMetric::EqualizedOdds => "equalized_odds",
        }
    }
}

impl fmt::Display for FairnessMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FairnessMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "accuracy_diff" | "accuracy" | "acc" => Ok(FairnessMetric::AccuracyDiff),
            "fpr_diff" | "fpr" => Ok(FairnessMetric::FprDiff),
            "fnr_diff" | "fnr" => Ok(FairnessMetric::FnrDiff),
            "equalized_odds" | "eo" => Ok(FairnessMetric::EqualizedOdds),
            other => Err(Error::invalid(format!("unknown fairness metric `{other}`"))),
        }
    }
}

/// Confusion counts of one group.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn record(&mut self, pred: u8, label: u8) {
        match (pred, label) {
            (1, 1) => self.tp += 1,
            (1, _) => self.fp += 1,
            (_, 1) => self.fn_ += 1,
            _ => self.tn += 1,
        }
    }

    pub fn error_rate(&self) -> Option<f64> {
        ratio(self.fp + self.fn_, self.total())
    }

    pub fn fpr(&self) -> Option<f64> {
        ratio(self.fp, self.fp + self.tn)
    }

    pub fn fnr(&self) -> Option<f64> {
        ratio(self.fn_, self.fn_ + self.tp)
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionByGroup {
    pub groups: [Confusion; 2],
}

impl ConfusionByGroup {
    pub fn from_predictions(preds: &[u8], labels: &[u8], groups: &[u8]) -> Result<Self> {
        check_lengths(preds, labels)?;
        check_lengths(preds, groups)?;
        let mut out = Self::default();
        for ((&p, &y), &s) in preds.iter().zip(labels).zip(groups) {
            out.groups[usize::from(s != 0)].record(p, y);
        }
        Ok(out)
    }

    fn rate(&self, g: usize, what: &str, f: impl Fn(&Confusion) -> Option<f64>) -> f64 {
        f(&self.groups[g]).unwrap_or_else(|| {
            log::debug!("{what} of group {g} has an empty denominator; using 0");
            0.0
        })
    }

    pub fn error_gap(&self) -> f64 {
        (self.rate(0, "error rate", Confusion::error_rate)
            - self.rate(1, "error rate", Confusion::error_rate))
        .abs()
    }

    pub fn fpr_gap(&self) -> f64 {
        (self.rate(0, "FPR", Confusion::fpr) - self.rate(1, "FPR", Confusion::fpr)).abs()
    }

    pub fn fnr_gap(&self) -> f64 {
        (self.rate(0, "FNR", Confusion::fnr) - self.rate(1, "FNR", Confusion::fnr)).abs()
    }

    pub fn fairness(&self, metric: FairnessMetric) -> f64 {
        match metric {
            FairnessMetric::AccuracyDiff => self.error_gap(),
            FairnessMetric::FprDiff => self.fpr_gap(),
            FairnessMetric::FnrDiff => self.fnr_gap(),
            FairnessMetric::EqualizedOdds => self.fpr_gap() + self.fnr_gap(),
        }
    }
}

fn check_lengths<A, B>(a: &[A], b: &[B]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

/// Fraction of mismatched predictions.
pub fn zero_one_risk(preds: &[u8], labels: &[u8]) -> Result<f64> {
    check_lengths(preds, labels)?;
    if preds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let wrong = preds.iter().zip(labels).filter(|(p, y)| p != y).count();
    Ok(wrong as f64 / preds.len() as f64)
}

/// Per-group 0-1 risks and their absolute gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupRisks {
    pub l0: f64,
    pub l1: f64,
    pub disc: f64,
}

pub fn group_risks(preds: &[u8], labels: &[u8], groups: &[u8]) -> Result<GroupRisks> {
    let conf = ConfusionByGroup::from_predictions(preds, labels, groups)?;
    let l0 = conf.groups[0].error_rate().ok_or(Error::EmptyGroup(0))?;
    let l1 = conf.groups[1].error_rate().ok_or(Error::EmptyGroup(1))?;
    Ok(GroupRisks {
        l0,
        l1,
        disc: (l0 - l1).abs(),
    })
}

pub fn fairness_value(
    metric: FairnessMetric,
    preds: &[u8],
    labels: &[u8],
    groups: &[u8],
) -> Result<f64> {
    Ok(ConfusionByGroup::from_predictions(preds, labels, groups)?.fairness(metric))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub size: usize,
    pub error: f64,
    pub fpr: f64,
    pub fnr: f64,
}

/// Accuracy, per-group rates and every fairness gap of one prediction vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessSummary {
    pub accuracy: f64,
    pub group0: GroupRates,
    pub group1: GroupRates,
    pub accuracy_diff: f64,
    pub fpr_diff: f64,
    pub fnr_diff: f64,
    pub equalized_odds: f64,
}

impl FairnessSummary {
    pub fn compute(preds: &[u8], labels: &[u8], groups: &[u8]) -> Result<Self> {
        let accuracy = 1.0 - zero_one_risk(preds, labels)?;
        let conf = ConfusionByGroup::from_predictions(preds, labels, groups)?;
        let rates = |g: usize| {
            let c = &conf.groups[g];
            GroupRates {
                size: c.total(),
                error: c.error_rate().unwrap_or(0.0),
                fpr: c.fpr().unwrap_or(0.0),
                fnr: c.fnr().unwrap_or(0.0),
            }
        };
        Ok(Self {
            accuracy,
            group0: rates(0),
            group1: rates(1),
            accuracy_diff: conf.fairness(FairnessMetric::AccuracyDiff),
            fpr_diff: conf.fairness(FairnessMetric::FprDiff),
            fnr_diff: conf.fairness(FairnessMetric::FnrDiff),
            equalized_odds: conf.fairness(FairnessMetric::EqualizedOdds),
        })
    }

    pub fn metric(&self, metric: FairnessMetric) -> f64 {
        match metric {
            FairnessMetric::AccuracyDiff => self.accuracy_diff,
            FairnessMetric::FprDiff => self.fpr_diff,
            FairnessMetric::FnrDiff => self.fnr_diff,
            FairnessMetric::EqualizedOdds => self.equalized_odds,
        }
    }
}

const NORMALIZATION_TOL: f64 = 1e-9;

/// Half the L1 distance between two probability vectors over the same support.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    check_lengths(p, q)?;
    for (name, dist) in [("p", p), ("q", q)] {
        if dist.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::invalid(format!("{name} has a negative or non-finite mass")));
        }
        let total: f64 = dist.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::invalid(format!("{name} sums to {total}, not 1")));
        }
    }
    let l1: f64 = p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum();
    Ok((0.5 * l1).min(1.0))
}

/// Right-hand side of the train/test imputation-mismatch bound:
/// `|l0_train - l1_train| + K * (p0 * tv0 + p1 * tv1)`.
pub fn theorem2_rhs(
    l0_train: f64,
    l1_train: f64,
    loss_bound: f64,
    p0: f64,
    p1: f64,
    tv0: f64,
    tv1: f64,
) -> Result<f64> {
    let inputs = [l0_train, l1_train, loss_bound, p0, p1, tv0, tv1];
    if inputs.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::invalid("bound inputs must be finite and nonnegative"));
    }
    if p0 > 1.0 || p1 > 1.0 || tv0 > 1.0 || tv1 > 1.0 {
        return Err(Error::invalid("probabilities and TV distances must not exceed 1"));
    }
    Ok((l0_train - l1_train).abs() + loss_bound * (p0 * tv0 + p1 * tv1))
}
