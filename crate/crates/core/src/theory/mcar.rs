use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{accumulate, key_vec, vec_key, Atom, FiniteJoint, EXACT_TOL};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Population,
    Group(u8),
}

/// One cell `(M = m, X = x)` of the factorization test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McarCell {
    pub m: u8,
    pub x: Vec<f64>,
    pub joint: f64,
    pub product: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McarReport {
    pub scope: Scope,
    pub holds: bool,
    pub cells: Vec<McarCell>,
}

impl McarReport {
    pub fn cell(&self, m: u8, x: &[f64]) -> Option<&McarCell> {
        let key = vec_key(x);
        self.cells.iter().find(|c| c.m == m && vec_key(&c.x) == key)
    }

    pub fn max_deviation(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| (c.joint - c.product).abs())
            .fold(0.0, f64::max)
    }
}

/// Tests `Pr(M = m, X = x) = Pr(M = m) Pr(X = x)` on every cell of the scoped
/// distribution, where `X` is the full covariate vector.
pub fn check_mcar(j: &FiniteJoint, scope: Scope) -> Result<McarReport> {
    let in_scope = |a: &&Atom| match scope {
        Scope::Population => true,
        Scope::Group(s) => a.s == s,
    };
    let total: f64 = j.atoms().iter().filter(in_scope).map(|a| a.prob).sum();
    if total <= 0.0 {
        return Err(match scope {
            Scope::Group(s) => Error::EmptyGroup(s),
            Scope::Population => Error::invalid("distribution has no mass"),
        });
    }

    let mut joint: BTreeMap<(u8, Vec<u64>), f64> = BTreeMap::new();
    let mut px: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
    let mut pm = [0.0; 2];
    for a in j.atoms().iter().filter(in_scope) {
        let p = a.prob / total;
        let key = vec_key(&a.full_x());
        accumulate(&mut joint, (a.m, key.clone()), p);
        accumulate(&mut px, key, p);
        pm[a.m as usize] += p;
    }

    let mut cells = Vec::with_capacity(2 * px.len());
    for m in 0..2u8 {
        for (key, &p_x) in &px {
            let p_joint = joint.get(&(m, key.clone())).copied().unwrap_or(0.0);
            cells.push(McarCell {
                m,
                x: key_vec(key),
                joint: p_joint,
                product: pm[m as usize] * p_x,
            });
        }
    }
    let holds = cells.iter().all(|c| (c.joint - c.product).abs() <= EXACT_TOL);
    Ok(McarReport { scope, holds, cells })
}

/// Two one-coordinate joints with nothing else observed:
///
/// * the first is MCAR inside each group but not over the population;
/// * the second is MCAR over the population but not inside either group.
pub fn lemma1_counterexamples() -> (FiniteJoint, FiniteJoint) {
    let atom = |s, x: f64, m, prob| Atom::new(s, vec![], x, m, 0, prob);

    // X | S ~ Bern(0.1 / 0.9), M | S ~ Bern(0.1 / 0.9), independent given S
    let q = [0.1, 0.9];
    let bern = |p: f64, v: u8| if v == 1 { p } else { 1.0 - p };
    let mut first = Vec::new();
    for s in 0..2u8 {
        for x in 0..2u8 {
            for m in 0..2u8 {
                let p = 0.5 * bern(q[s as usize], x) * bern(q[s as usize], m);
                first.push(atom(s, f64::from(x), m, p));
            }
        }
    }

    // Pr(M = m, X = x | S = s), listed as (m, x, prob)
    let cells: [[(u8, u8, f64); 4]; 2] = [
        [(0, 0, 0.1), (0, 1, 0.3), (1, 0, 0.4), (1, 1, 0.2)],
        [(0, 0, 0.4), (0, 1, 0.2), (1, 0, 0.1), (1, 1, 0.3)],
    ];
    let mut second = Vec::new();
    for (s, group) in cells.iter().enumerate() {
        for &(m, x, p) in group {
            second.push(atom(s as u8, f64::from(x), m, 0.5 * p));
        }
    }

    (
        FiniteJoint::new(first).expect("valid construction"),
        FiniteJoint::new(second).expect("valid construction"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn first_construction() {
        let (j, _) = lemma1_counterexamples();
        for s in 0..2 {
            assert!(check_mcar(&j, Scope::Group(s)).unwrap().holds);
        }
        let r = check_mcar(&j, Scope::Population).unwrap();
        assert!(!r.holds);
        let c = r.cell(1, &[1.0]).unwrap();
        assert!((c.joint - 0.41).abs() <= 1e-12);
        assert!((c.product - 0.25).abs() <= 1e-12);
    }

    #[test]
    fn second_construction() {
        let (_, j) = lemma1_counterexamples();
        let r = check_mcar(&j, Scope::Population).unwrap();
        assert!(r.holds);
        for c in &r.cells {
            assert!((c.joint - 0.25).abs() <= 1e-12);
        }
        for s in 0..2 {
            assert!(!check_mcar(&j, Scope::Group(s)).unwrap().holds);
        }
    }

    #[test]
    fn product_distribution_is_mcar_everywhere() {
        let mut atoms = Vec::new();
        for s in 0..2u8 {
            for x in [0.0, 0.5, 1.0] {
                for m in 0..2u8 {
                    let pm = if m == 1 { 0.3 } else { 0.7 };
                    atoms.push(Atom::new(s, vec![], x, m, 0, 0.5 * pm / 3.0));
                }
            }
        }
        let j = FiniteJoint::new(atoms).unwrap();
        for scope in [Scope::Population, Scope::Group(0), Scope::Group(1)] {
            assert!(check_mcar(&j, scope).unwrap().holds);
        }
    }

    #[test]
    fn empty_scope_is_an_error() {
        let j = FiniteJoint::new(vec![Atom::new(0, vec![], 0.0, 0, 0, 1.0)]).unwrap();
        assert!(matches!(check_mcar(&j, Scope::Group(1)), Err(Error::EmptyGroup(1))));
    }

    /// Independent check: a 2 x k contingency table factorizes iff every 2 x 2 minor
    /// vanishes, i.e. `P(0, x) P(1, x') = P(1, x) P(0, x')`.
    fn minors_vanish(table: &[[f64; 2]]) -> bool {
        table.iter().all(|a| {
            table
                .iter()
                .all(|b| (a[0] * b[1] - a[1] * b[0]).abs() <= 1e-13)
        })
    }

    proptest! {
        #[test]
        fn agrees_with_contingency_minors(
            weights in proptest::collection::vec(0u32..4, 6),
            indep in any::<bool>(),
            pm in 1u32..4,
        ) {
            // three x-values, two m-values; optionally force a product structure
            let mut table = [[0.0f64; 2]; 3];
            for x in 0..3 {
                for m in 0..2 {
                    table[x][m] = if indep {
                        f64::from(weights[x] + 1) * f64::from(if m == 1 { pm } else { 4 - pm })
                    } else {
                        f64::from(weights[2 * x + m])
                    };
                }
            }
            let total: f64 = table.iter().flatten().sum();
            prop_assume!(total > 0.0);
            let mut atoms = Vec::new();
            for x in 0..3 {
                for m in 0..2 {
                    table[x][m] /= total;
                    atoms.push(Atom::new(0, vec![], x as f64, m as u8, 0, table[x][m]));
                }
            }
            let j = FiniteJoint::new(atoms).unwrap();
            let holds = check_mcar(&j, Scope::Population).unwrap().holds;
            prop_assert_eq!(holds, minors_vanish(&table));
            if indep {
                prop_assert!(holds);
            }
        }
    }
}
