use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::build::FairFamily;
use super::{MipProgram, ModelConfig, Sense, VarKind};
use crate::dataset::TabularDataset;
use crate::tree::{n_branches, n_leaves, MiaTree};
use crate::{Error, Result};

const FEASIBILITY_TOL: f64 = 1e-9;

/// Values for the variables of a program, in program order. `None` marks a variable
/// without a value.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeAssignment {
    pub values: Vec<Option<f64>>,
}

impl TreeAssignment {
    pub fn get(&self, p: &MipProgram, name: &str) -> Option<f64> {
        p.var_index(name).and_then(|k| self.values[k])
    }

    pub fn set(&mut self, p: &MipProgram, name: &str, value: f64) -> Result<()> {
        let k = p.var_index(name).ok_or_else(|| Error::invalid(format!("no variable `{name}`")))?;
        self.values[k] = Some(value);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Constraint family, or `bounds` / `integrality` for variable-level violations.
    pub tag: String,
    /// Constraint index, or variable index for variable-level violations.
    pub index: usize,
    pub activity: f64,
    pub rhs: f64,
}

/// The assignment a tree induces on the program built from the same batch: routing
/// indicators from simulating the splits, `u` from the tree's leaves, and the loss and
/// fairness variables evaluated at those labels.
pub fn assignment_from_tree(
    tree: &MiaTree,
    batch: &TabularDataset,
    cfg: &ModelConfig,
    program: &MipProgram,
) -> Result<TreeAssignment> {
    if tree.depth != cfg.depth || program.shape.depth != cfg.depth {
        return Err(Error::invalid(format!(
            "tree depth {} does not match config depth {}",
            tree.depth, cfg.depth
        )));
    }
    if program.shape.n != batch.n_rows() || program.shape.d != batch.n_features() {
        return Err(Error::DimensionMismatch { expected: program.shape.n, got: batch.n_rows() });
    }
    tree.validate(batch.n_features())?;
    if tree.branches.iter().any(|b| !(-1.0..=1.0).contains(&b.threshold)) {
        return Err(Error::invalid("thresholds must lie in [-1, 1]"));
    }
    let (n, d) = (batch.n_rows(), batch.n_features());
    let (nb, nl) = (n_branches(tree.depth), n_leaves(tree.depth));
    let index: HashMap<&str, usize> =
        program.vars.iter().enumerate().map(|(k, v)| (v.name.as_str(), k)).collect();
    let mut a = TreeAssignment { values: vec![None; program.vars.len()] };
    let mut put = |name: String, value: f64| -> Result<()> {
        let k = index
            .get(name.as_str())
            .ok_or_else(|| Error::invalid(format!("program has no variable `{name}`")))?;
        a.values[*k] = Some(value);
        Ok(())
    };
    let bit = |b: bool| f64::from(u8::from(b));

    for (v, br) in tree.branches.iter().enumerate() {
        for j in 0..d {
            put(format!("p_v{v}_j{j}"), bit(j == br.feature))?;
        }
        put(format!("q_v{v}"), br.threshold)?;
        put(format!("c_v{v}"), bit(br.missing_left))?;
    }
    for (l, &label) in tree.leaves.iter().enumerate() {
        put(format!("u_l{l}"), f64::from(label))?;
    }

    let mut leaf_rows: Vec<Vec<usize>> = vec![Vec::new(); nl];
    for i in 0..n {
        for (v, br) in tree.branches.iter().enumerate() {
            let missing = batch.is_missing(i, br.feature);
            let value = batch.get(i, br.feature).unwrap_or(0.0);
            let wnm = br.threshold >= value;
            let w1 = !missing && wnm;
            let w2 = missing && br.missing_left;
            put(format!("w_i{i}_v{v}"), bit(w1 || w2))?;
            put(format!("w1_i{i}_v{v}"), bit(w1))?;
            put(format!("w2_i{i}_v{v}"), bit(w2))?;
            put(format!("wnm_i{i}_v{v}"), bit(wnm))?;
        }
        let leaf = tree.route_unchecked(batch.row_values(i), batch.row_mask(i));
        leaf_rows[leaf].push(i);
        for l in 0..nl {
            put(format!("z_i{i}_l{l}"), bit(l == leaf))?;
        }
    }
    debug_assert_eq!(nb, tree.branches.len());

    let (labels, groups) = (batch.labels(), batch.groups());
    for (l, rows) in leaf_rows.iter().enumerate() {
        let pos = rows.iter().filter(|&&i| labels[i] == 1).count();
        let neg = rows.len() - pos;
        let loss = if tree.leaves[l] == 1 { neg } else { pos };
        put(format!("loss_l{l}"), loss as f64)?;
    }

    for (family, f_name, lfair_name) in FairFamily::for_metric(cfg.metric) {
        let mut totals = [0.0; 2];
        for (l, rows) in leaf_rows.iter().enumerate() {
            for g in 0..2u8 {
                let count = rows
                    .iter()
                    .filter(|&&i| {
                        let wrong = labels[i] != tree.leaves[l];
                        groups[i] == g
                            && wrong
                            && match family {
                                FairFamily::Accuracy => true,
                                FairFamily::Fpr => labels[i] == 0,
                                FairFamily::Fnr => labels[i] == 1,
                            }
                    })
                    .count() as f64;
                put(format!("{f_name}_l{l}_s{g}"), count)?;
                let den = family.denominator(labels, groups, g);
                if den > 0 {
                    totals[g as usize] += count / den as f64;
                }
            }
        }
        put(lfair_name.to_string(), (totals[0] - totals[1]).abs())?;
    }
    Ok(a)
}

fn values_of(p: &MipProgram, a: &TreeAssignment) -> Result<Vec<f64>> {
    if a.values.len() != p.vars.len() {
        return Err(Error::DimensionMismatch { expected: p.vars.len(), got: a.values.len() });
    }
    a.values
        .iter()
        .zip(&p.vars)
        .map(|(v, var)| v.ok_or_else(|| Error::invalid(format!("variable `{}` has no value", var.name))))
        .collect()
}

/// Every violated bound, integrality requirement and constraint, within `1e-9`.
pub fn check_feasibility(p: &MipProgram, a: &TreeAssignment) -> Result<Vec<Violation>> {
    let x = values_of(p, a)?;
    let mut out = Vec::new();
    for (k, (var, &v)) in p.vars.iter().zip(&x).enumerate() {
        if v < var.lb - FEASIBILITY_TOL || v > var.ub + FEASIBILITY_TOL {
            out.push(Violation { tag: "bounds".into(), index: k, activity: v, rhs: var.lb });
        }
        if var.kind == VarKind::Binary && (v - v.round()).abs() > FEASIBILITY_TOL {
            out.push(Violation { tag: "integrality".into(), index: k, activity: v, rhs: v.round() });
        }
    }
    for (k, c) in p.constraints.iter().enumerate() {
        let activity: f64 = c.terms.iter().map(|&(j, coef)| coef * x[j]).sum();
        let ok = match c.sense {
            Sense::Le => activity <= c.rhs + FEASIBILITY_TOL,
            Sense::Ge => activity >= c.rhs - FEASIBILITY_TOL,
            Sense::Eq => (activity - c.rhs).abs() <= FEASIBILITY_TOL,
        };
        if !ok {
            out.push(Violation { tag: c.tag.clone(), index: k, activity, rhs: c.rhs });
        }
    }
    Ok(out)
}

/// Objective at `a`. An infeasible assignment is logged and still evaluated.
pub fn objective_value(p: &MipProgram, a: &TreeAssignment) -> Result<f64> {
    let violations = check_feasibility(p, a)?;
    if !violations.is_empty() {
        log::warn!(
            "evaluating the objective at an infeasible assignment ({} violations, first `{}`)",
            violations.len(),
            violations[0].tag
        );
    }
    let x = values_of(p, a)?;
    Ok(p.objective.iter().map(|&(k, c)| c * x[k]).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::FairnessMetric;
    use crate::mip::build_program;
    use crate::tree::{evaluate_objective, fit_leaves, Branch, SENTINEL};

    fn batch() -> TabularDataset {
        TabularDataset::from_rows(
            &[
                vec![Some(0.1), Some(0.5)],
                vec![None, Some(0.2)],
                vec![Some(0.6), None],
                vec![Some(0.9), Some(1.0)],
                vec![Some(0.3), None],
            ],
            vec![1, 0, 0, 1, 1],
            vec![0, 0, 1, 1, 0],
            vec!["a".into(), "b".into()],
        )
        .unwrap()
    }

    fn tree() -> MiaTree {
        let b = |feature, threshold, missing_left| Branch { feature, threshold, missing_left };
        let t = MiaTree::new(2, vec![b(0, 0.45, true), b(1, SENTINEL, true), b(1, 0.35, false)], vec![0; 4], vec![])
            .unwrap();
        fit_leaves(&t, &batch()).unwrap()
    }

    #[test]
    fn induced_assignment_is_feasible_and_consistent() {
        for metric in FairnessMetric::ALL {
            let cfg = ModelConfig::new(2, 0.7, metric);
            let p = build_program(&batch(), &cfg).unwrap();
            let a = assignment_from_tree(&tree(), &batch(), &cfg, &p).unwrap();
            assert_eq!(check_feasibility(&p, &a).unwrap(), vec![], "{metric}");
            let direct = evaluate_objective(&tree(), &batch(), 0.7, metric).unwrap();
            assert!((objective_value(&p, &a).unwrap() - direct).abs() <= 1e-9);
        }
    }

    #[test]
    fn mutations_are_flagged() {
        let cfg = ModelConfig::new(2, 0.7, FairnessMetric::FnrDiff);
        let p = build_program(&batch(), &cfg).unwrap();
        let a = assignment_from_tree(&tree(), &batch(), &cfg, &p).unwrap();

        let mut flipped = a.clone();
        let u = flipped.get(&p, "u_l0").unwrap();
        flipped.set(&p, "u_l0", 1.0 - u).unwrap();
        let tags: Vec<String> = check_feasibility(&p, &flipped).unwrap().into_iter().map(|v| v.tag).collect();
        assert!(tags.iter().any(|t| t.starts_with("leaf_")), "{tags:?}");

        let mut misrouted = a.clone();
        let leaf = (0..4).find(|l| a.get(&p, &format!("z_i0_l{l}")) == Some(1.0)).unwrap();
        misrouted.set(&p, &format!("z_i0_l{leaf}"), 0.0).unwrap();
        misrouted.set(&p, &format!("z_i0_l{}", (leaf + 1) % 4), 1.0).unwrap();
        let tags: Vec<String> = check_feasibility(&p, &misrouted).unwrap().into_iter().map(|v| v.tag).collect();
        assert!(tags.iter().any(|t| t == "branch_7"), "{tags:?}");
    }

    #[test]
    fn incomplete_assignment_is_an_error() {
        let cfg = ModelConfig::new(2, 0.7, FairnessMetric::FnrDiff);
        let p = build_program(&batch(), &cfg).unwrap();
        let mut a = assignment_from_tree(&tree(), &batch(), &cfg, &p).unwrap();
        a.values[3] = None;
        assert!(check_feasibility(&p, &a).is_err());
        let wrong_depth = ModelConfig::new(1, 0.7, FairnessMetric::FnrDiff);
        assert!(assignment_from_tree(&tree(), &batch(), &wrong_depth, &p).is_err());
    }

    #[test]
    fn empty_program_is_feasible() {
        let cfg = ModelConfig::new(1, 0.0, FairnessMetric::FnrDiff);
        let mut p = build_program(&batch(), &cfg).unwrap();
        p.constraints.clear();
        let a = TreeAssignment { values: p.vars.iter().map(|v| Some(v.lb.max(0.0))).collect() };
        assert!(check_feasibility(&p, &a).unwrap().is_empty());
    }
}
