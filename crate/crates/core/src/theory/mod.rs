//! Exact checks on small finite joint distributions of `(S, X, M, Y)`.
//!
//! Every atom carries the observed coordinates `x_obs`, the value of the single
//! designated missable coordinate `x_ms` and the flag `m`. When `m = 1` the model only
//! sees `x_obs`; imputation appends a fill value computed from `x_obs`, so the imputed
//! vector is `x_obs ++ [fill]`. When `m = 0` it is `x_obs ++ [x_ms]`.

mod conformal;
mod mcar;
mod report;
mod shift;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use conformal::{
    conformal_scan, dense_fill_grid, theorem3_witness, threshold_grid, ConformalScanResult,
    Theorem3Witness,
};
pub use mcar::{check_mcar, lemma1_counterexamples, McarCell, McarReport, Scope};
pub use report::{
    random_fill, random_joint, run_all, theorem1_monte_carlo, SuiteOptions, TheoryCheck,
    TheoryReport,
};
pub use shift::{theorem2_tightness, verify_theorem2, Theorem2Check};

/// Probabilities must sum to one within this tolerance; comparisons use it too.
pub const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub s: u8,
    pub x_obs: Vec<f64>,
    /// Value of the missable coordinate, hidden from the model when `m = 1`.
    pub x_ms: f64,
    pub m: u8,
    pub y: u8,
    pub prob: f64,
}

impl Atom {
    pub fn new(s: u8, x_obs: Vec<f64>, x_ms: f64, m: u8, y: u8, prob: f64) -> Self {
        Atom { s, x_obs, x_ms, m, y, prob }
    }

    /// Full covariate vector `(x_obs, x_ms)` regardless of missingness.
    pub fn full_x(&self) -> Vec<f64> {
        let mut x = self.x_obs.clone();
        x.push(self.x_ms);
        x
    }

    /// The vector a downstream model sees after imputing with `fill`.
    pub fn imputed(&self, fill: &FillRule) -> Result<Vec<f64>> {
        let last = if self.m == 1 { fill.value(&self.x_obs)? } else { self.x_ms };
        let mut x = self.x_obs.clone();
        x.push(last);
        Ok(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteJoint {
    atoms: Vec<Atom>,
}

impl FiniteJoint {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        let first = atoms
            .first()
            .ok_or_else(|| Error::invalid("a finite joint needs at least one atom"))?;
        let dim = first.x_obs.len();
        let mut total = 0.0;
        for (k, a) in atoms.iter().enumerate() {
            if a.s > 1 || a.m > 1 || a.y > 1 {
                return Err(Error::invalid(format!("atom {k}: s, m and y must be 0 or 1")));
            }
            if a.x_obs.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: a.x_obs.len() });
            }
            if !a.prob.is_finite() || a.prob < 0.0 {
                return Err(Error::invalid(format!("atom {k}: probability {} is invalid", a.prob)));
            }
            if a.x_obs.iter().chain([&a.x_ms]).any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("atom {k}: coordinates must be finite")));
            }
            total += a.prob;
        }
        if (total - 1.0).abs() > EXACT_TOL {
            return Err(Error::invalid(format!("atom probabilities sum to {total}, not 1")));
        }
        Ok(FiniteJoint { atoms })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Dimension of the full covariate vector, observed coordinates plus the missable one.
    pub fn dim(&self) -> usize {
        self.atoms[0].x_obs.len() + 1
    }

    pub fn group_prob(&self, s: u8) -> f64 {
        self.atoms.iter().filter(|a| a.s == s).map(|a| a.prob).sum()
    }

    /// `Pr(M = 1 | S = s)`; zero for a group without mass.
    pub fn missing_prob(&self, s: u8) -> f64 {
        let ps = self.group_prob(s);
        if ps == 0.0 {
            return 0.0;
        }
        let pm: f64 = self.atoms.iter().filter(|a| a.s == s && a.m == 1).map(|a| a.prob).sum();
        pm / ps
    }
}

/// How the missable coordinate is filled from the observed ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FillRule {
    Constant { value: f64 },
    /// `1[x_obs[axis] <= cut]`
    IndicatorLeq { axis: usize, cut: f64 },
    /// `1[x_obs[axis] > cut]`
    IndicatorGt { axis: usize, cut: f64 },
}

impl FillRule {
    pub fn value(&self, x_obs: &[f64]) -> Result<f64> {
        let coord = |axis: usize| {
            x_obs.get(axis).copied().ok_or(Error::DimensionMismatch {
                expected: axis + 1,
                got: x_obs.len(),
            })
        };
        Ok(match *self {
            FillRule::Constant { value } => value,
            FillRule::IndicatorLeq { axis, cut } => f64::from(u8::from(coord(axis)? <= cut)),
            FillRule::IndicatorGt { axis, cut } => f64::from(u8::from(coord(axis)? > cut)),
        })
    }
}

/// The family `{ x -> 1[x_axis >= a] }`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdClass {
    pub axis: usize,
}

impl ThresholdClass {
    pub fn member(self, threshold: f64) -> ThresholdHypothesis {
        ThresholdHypothesis { axis: self.axis, threshold }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdHypothesis {
    pub axis: usize,
    pub threshold: f64,
}

impl ThresholdHypothesis {
    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        let v = x.get(self.axis).ok_or(Error::DimensionMismatch {
            expected: self.axis + 1,
            got: x.len(),
        })?;
        Ok(u8::from(*v >= self.threshold))
    }
}

/// Overall and per-group 0-1 risk of `h` on the distribution imputed by `fill`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImputedRisks {
    pub overall: f64,
    pub groups: [f64; 2],
}

impl ImputedRisks {
    pub fn gap(&self) -> f64 {
        (self.groups[0] - self.groups[1]).abs()
    }
}

pub fn imputed_risks(j: &FiniteJoint, h: &ThresholdHypothesis, fill: &FillRule) -> Result<ImputedRisks> {
    let mut overall = 0.0;
    let mut err = [0.0; 2];
    let mut mass = [0.0; 2];
    for a in j.atoms() {
        let wrong = f64::from(u8::from(h.predict(&a.imputed(fill)?)? != a.y));
        overall += a.prob * wrong;
        err[a.s as usize] += a.prob * wrong;
        mass[a.s as usize] += a.prob;
    }
    let mut groups = [0.0; 2];
    for s in 0..2 {
        if mass[s] == 0.0 {
            return Err(Error::EmptyGroup(s as u8));
        }
        groups[s] = err[s] / mass[s];
    }
    Ok(ImputedRisks { overall, groups })
}

/// Total-order key for a real vector; `-0.0` and `0.0` coincide.
pub(crate) fn vec_key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| (v + 0.0).to_bits()).collect()
}

pub(crate) fn key_vec(k: &[u64]) -> Vec<f64> {
    k.iter().map(|b| f64::from_bits(*b)).collect()
}

pub(crate) fn accumulate<K: Ord>(map: &mut BTreeMap<K, f64>, key: K, p: f64) {
    *map.entry(key).or_insert(0.0) += p;
}
