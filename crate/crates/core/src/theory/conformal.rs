use serde::{Deserialize, Serialize};

use super::{imputed_risks, Atom, FillRule, FiniteJoint, ThresholdClass, EXACT_TOL};
use crate::{Error, Result};

/// Best overall risk reachable within the class under a group-gap constraint.
///
/// When no threshold satisfies the constraint the result is `feasible = false` with
/// `min_feasible_risk = 1.0`, the worst possible 0-1 risk, and no argmin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalScanResult {
    pub fill: FillRule,
    pub min_feasible_risk: f64,
    pub argmin_threshold: Option<f64>,
    pub feasible: bool,
}

/// For each fill, minimizes overall risk over `threshold_grid` subject to
/// `|L_0 - L_1| <= eps`. Ties between thresholds go to the smallest one.
pub fn conformal_scan(
    j: &FiniteJoint,
    cls: ThresholdClass,
    fill_grid: &[FillRule],
    eps: f64,
    threshold_grid: &[f64],
) -> Result<Vec<ConformalScanResult>> {
    if fill_grid.is_empty() || threshold_grid.is_empty() {
        return Err(Error::invalid("conformal scan needs nonempty fill and threshold grids"));
    }
    if cls.axis >= j.dim() {
        return Err(Error::DimensionMismatch { expected: j.dim(), got: cls.axis + 1 });
    }
    let mut thresholds = threshold_grid.to_vec();
    thresholds.sort_by(f64::total_cmp);

    fill_grid
        .iter()
        .map(|fill| {
            let mut best: Option<(f64, f64)> = None;
            for &a in &thresholds {
                let r = imputed_risks(j, &cls.member(a), fill)?;
                if r.gap() > eps + EXACT_TOL {
                    continue;
                }
                if best.is_none_or(|(risk, _)| r.overall < risk - EXACT_TOL) {
                    best = Some((r.overall, a));
                }
            }
            Ok(match best {
                Some((risk, a)) => ConformalScanResult {
                    fill: *fill,
                    min_feasible_risk: risk,
                    argmin_threshold: Some(a),
                    feasible: true,
                },
                None => ConformalScanResult {
                    fill: *fill,
                    min_feasible_risk: 1.0,
                    argmin_threshold: None,
                    feasible: false,
                },
            })
        })
        .collect()
}

/// Thresholds exhaustive for `axis` under the given fills: every imputed coordinate,
/// the midpoints between consecutive ones, and one sentinel below and above.
pub fn threshold_grid(j: &FiniteJoint, axis: usize, fills: &[FillRule]) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for a in j.atoms() {
        for f in fills {
            let x = a.imputed(f)?;
            values.push(*x.get(axis).ok_or(Error::DimensionMismatch {
                expected: axis + 1,
                got: x.len(),
            })?);
        }
    }
    values.sort_by(f64::total_cmp);
    values.dedup();
    let (Some(&lo), Some(&hi)) = (values.first(), values.last()) else {
        return Err(Error::invalid("threshold grid needs at least one fill"));
    };
    let mut grid = vec![lo - 1.0];
    for w in values.windows(2) {
        grid.push(w[0]);
        grid.push(0.5 * (w[0] + w[1]));
    }
    grid.push(hi);
    grid.push(hi + 1.0);
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem3Witness {
    pub joint: FiniteJoint,
    /// Thresholds on the observed coordinate.
    pub h1: ThresholdClass,
    /// Thresholds on the imputed coordinate.
    pub h2: ThresholdClass,
    /// A fill under which `h2` contains a perfect, perfectly fair predictor.
    pub fill: FillRule,
}

/// Instance with no universally conformal imputation.
///
/// Every point is missing. Group 0 sits at `x_obs = 0` with label 1 and group 1 at
/// `x_obs = 1` with label 0. Thresholding `x_obs` either misclassifies both groups or
/// serves exactly one of them, whatever the fill; thresholding the filled coordinate
/// works once the fill is `1[x_obs <= 0]`.
pub fn theorem3_witness() -> Theorem3Witness {
    let joint = FiniteJoint::new(vec![
        Atom::new(0, vec![0.0], 0.0, 1, 1, 0.5),
        Atom::new(1, vec![1.0], 0.0, 1, 0, 0.5),
    ])
    .expect("valid construction");
    Theorem3Witness {
        joint,
        h1: ThresholdClass { axis: 0 },
        h2: ThresholdClass { axis: 1 },
        fill: FillRule::IndicatorLeq { axis: 0, cut: 0.0 },
    }
}

/// Constant fills `0, 0.01, ..., 1` plus indicator fills on the observed coordinate.
pub fn dense_fill_grid() -> Vec<FillRule> {
    let mut fills: Vec<FillRule> = (0..=100)
        .map(|k| FillRule::Constant { value: f64::from(k) / 100.0 })
        .collect();
    for cut in [-0.5, 0.0, 0.25, 0.5, 0.75, 1.0] {
        fills.push(FillRule::IndicatorLeq { axis: 0, cut });
        fills.push(FillRule::IndicatorGt { axis: 0, cut });
    }
    fills
}
