use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{accumulate, imputed_risks, vec_key, Atom, FillRule, FiniteJoint, ThresholdClass, ThresholdHypothesis, EXACT_TOL};
use crate::metrics::{theorem2_rhs, tv_distance};
use crate::Result;

/// Both sides of the train/test imputation-mismatch bound for one hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Check {
    /// Group-risk gap with the test-time imputation.
    pub lhs: f64,
    pub rhs: f64,
    pub train_gap: f64,
    /// `Pr(M = 1 | S = s)`
    pub p: [f64; 2],
    /// TV distance between the train and test pushforwards of `(f(X), Y) | M = 1, S = s`.
    pub tv: [f64; 2],
    pub holds: bool,
}

/// Distribution of `(f(X), Y)` given `M = 1, S = s`, keyed for alignment.
fn pushforward(j: &FiniteJoint, s: u8, fill: &FillRule) -> Result<BTreeMap<(Vec<u64>, u8), f64>> {
    let mass: f64 = j.atoms().iter().filter(|a| a.s == s && a.m == 1).map(|a| a.prob).sum();
    let mut out = BTreeMap::new();
    if mass == 0.0 {
        return Ok(out);
    }
    for a in j.atoms().iter().filter(|a| a.s == s && a.m == 1) {
        accumulate(&mut out, (vec_key(&a.imputed(fill)?), a.y), a.prob / mass);
    }
    Ok(out)
}

fn group_tv(j: &FiniteJoint, s: u8, f_train: &FillRule, f_test: &FillRule) -> Result<f64> {
    let p = pushforward(j, s, f_train)?;
    let q = pushforward(j, s, f_test)?;
    if p.is_empty() {
        return Ok(0.0);
    }
    let mut support: Vec<_> = p.keys().chain(q.keys()).cloned().collect();
    support.sort();
    support.dedup();
    let pv: Vec<f64> = support.iter().map(|k| p.get(k).copied().unwrap_or(0.0)).collect();
    let qv: Vec<f64> = support.iter().map(|k| q.get(k).copied().unwrap_or(0.0)).collect();
    tv_distance(&pv, &qv)
}

/// Evaluates both sides of the bound with 0-1 loss (`K = 1`).
pub fn verify_theorem2(
    j: &FiniteJoint,
    h: &ThresholdHypothesis,
    f_train: &FillRule,
    f_test: &FillRule,
) -> Result<Theorem2Check> {
    let train = imputed_risks(j, h, f_train)?;
    let test = imputed_risks(j, h, f_test)?;
    let p = [j.missing_prob(0), j.missing_prob(1)];
    let tv = [group_tv(j, 0, f_train, f_test)?, group_tv(j, 1, f_train, f_test)?];
    let rhs = theorem2_rhs(train.groups[0], train.groups[1], 1.0, p[0], p[1], tv[0], tv[1])?;
    let lhs = test.gap();
    Ok(Theorem2Check {
        lhs,
        rhs,
        train_gap: train.gap(),
        p,
        tv,
        holds: lhs <= rhs + EXACT_TOL,
    })
}

/// Instance on which the bound is attained with both sides equal to 1.
///
/// Every point is missing; group 0 observes `x_obs = 0` and group 1 observes
/// `x_obs = 1`, both with label 0. `h = 1[x_2 >= 0.5]`, training fills 0 and testing
/// fills `1[x_obs <= 0.5]`.
pub fn theorem2_tightness() -> (FiniteJoint, ThresholdHypothesis, FillRule, FillRule) {
    let j = FiniteJoint::new(vec![
        Atom::new(0, vec![0.0], 0.0, 1, 0, 0.5),
        Atom::new(1, vec![1.0], 0.0, 1, 0, 0.5),
    ])
    .expect("valid construction");
    (
        j,
        ThresholdClass { axis: 1 }.member(0.5),
        FillRule::Constant { value: 0.0 },
        FillRule::IndicatorLeq { axis: 0, cut: 0.5 },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tightness_construction() {
        let (j, h, train, test) = theorem2_tightness();
        let c = verify_theorem2(&j, &h, &train, &test).unwrap();
        assert_eq!(c.lhs, 1.0);
        assert_eq!(c.rhs, 1.0);
        assert_eq!(c.train_gap, 0.0);
        assert_eq!(c.p, [1.0, 1.0]);
        assert_eq!(c.tv, [1.0, 0.0]);
        assert!(c.holds);
    }

    #[test]
    fn matched_imputation_has_zero_tv() {
        let (j, h, train, _) = theorem2_tightness();
        let c = verify_theorem2(&j, &h, &train, &train).unwrap();
        assert_eq!(c.tv, [0.0, 0.0]);
        assert_eq!(c.rhs, c.train_gap);
        assert_eq!(c.lhs, c.train_gap);
    }

    #[test]
    fn random_instances_satisfy_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let n = rng.random_range(2..=8);
            let mut atoms: Vec<Atom> = (0..n)
                .map(|k| {
                    Atom::new(
                        (k % 2) as u8,
                        vec![rng.random_range(0..5) as f64 / 4.0],
                        rng.random_range(0..5) as f64 / 4.0,
                        u8::from(rng.random_bool(0.6)),
                        u8::from(rng.random_bool(0.5)),
                        rng.random_range(1..10) as f64,
                    )
                })
                .collect();
            let total: f64 = atoms.iter().map(|a| a.prob).sum();
            atoms.iter_mut().for_each(|a| a.prob /= total);
            let j = FiniteJoint::new(atoms).unwrap();
            let h = ThresholdClass { axis: rng.random_range(0..2) }.member(rng.random::<f64>());
            let train = FillRule::Constant { value: rng.random() };
            let test = FillRule::Constant { value: rng.random() };
            assert!(verify_theorem2(&j, &h, &train, &test).unwrap().holds);
        }
    }
}
