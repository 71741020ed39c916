use super::{Constraint, MipProgram, ModelConfig, ProgramShape, Sense, VarKind, Variable, SPLIT_BIG_M};
use crate::dataset::TabularDataset;
use crate::metrics::FairnessMetric;
use crate::tree::{n_branches, n_leaves};
use crate::{Error, Result};

/// Which confusion cell an `f` family counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum FairFamily {
    /// Misclassified points of either label.
    Accuracy,
    /// False positives (only leaves predicting 1 count).
    Fpr,
    /// False negatives (only leaves predicting 0 count).
    Fnr,
}

impl FairFamily {
    pub(crate) fn for_metric(metric: FairnessMetric) -> Vec<(FairFamily, &'static str, &'static str)> {
        match metric {
            FairnessMetric::AccuracyDiff => vec![(FairFamily::Accuracy, "f", "lfair")],
            FairnessMetric::FprDiff => vec![(FairFamily::Fpr, "f", "lfair")],
            FairnessMetric::FnrDiff => vec![(FairFamily::Fnr, "f", "lfair")],
            FairnessMetric::EqualizedOdds => vec![
                (FairFamily::Fpr, "f_fpr", "lfair_fpr"),
                (FairFamily::Fnr, "f_fnr", "lfair_fnr"),
            ],
        }
    }

    /// Number of rows of group `s` the rate is normalized by.
    pub(crate) fn denominator(self, labels: &[u8], groups: &[u8], s: u8) -> usize {
        labels
            .iter()
            .zip(groups)
            .filter(|&(&y, &g)| {
                g == s
                    && match self {
                        FairFamily::Accuracy => true,
                        FairFamily::Fpr => y == 0,
                        FairFamily::Fnr => y == 1,
                    }
            })
            .count()
    }
}

/// Leaves (left to right) in the left and right subtrees of branch `v`.
pub(crate) fn descendant_leaves(depth: usize, v: usize) -> (Vec<usize>, Vec<usize>) {
    let nb = n_branches(depth);
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for l in 0..n_leaves(depth) {
        let mut child = nb + l;
        while child > 0 {
            let parent = (child - 1) / 2;
            if parent == v {
                if child == 2 * v + 1 {
                    left.push(l);
                } else {
                    right.push(l);
                }
                break;
            }
            child = parent;
        }
    }
    (left, right)
}

/// Smallest gap between distinct observed values of any feature, halved.
fn min_half_gap(batch: &TabularDataset) -> f64 {
    let mut best = f64::INFINITY;
    for j in 0..batch.n_features() {
        let mut vals: Vec<f64> = (0..batch.n_rows()).filter_map(|i| batch.get(i, j)).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            best = best.min(0.5 * (w[1] - w[0]));
        }
    }
    best
}

struct Builder {
    vars: Vec<Variable>,
    constraints: Vec<Constraint>,
}

impl Builder {
    fn var(&mut self, name: String, kind: VarKind, lb: f64, ub: f64) -> usize {
        self.vars.push(Variable { name, kind, lb, ub });
        self.vars.len() - 1
    }

    fn binary(&mut self, name: String) -> usize {
        self.var(name, VarKind::Binary, 0.0, 1.0)
    }

    fn nonneg(&mut self, name: String) -> usize {
        self.var(name, VarKind::Continuous, 0.0, f64::INFINITY)
    }

    fn add(&mut self, tag: &str, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        let terms = terms.into_iter().filter(|&(_, c)| c != 0.0).collect();
        self.constraints.push(Constraint { tag: tag.to_string(), terms, sense, rhs: rhs + 0.0 });
    }
}

/// Materializes the program for `batch` (features scaled to `[0, 1]`, both groups
/// present).
pub fn build_program(batch: &TabularDataset, cfg: &ModelConfig) -> Result<MipProgram> {
    cfg.validate()?;
    let (n, d) = (batch.n_rows(), batch.n_features());
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if d == 0 {
        return Err(Error::invalid("no features"));
    }
    if !batch.is_unit_scaled() {
        return Err(Error::invalid("program expects features scaled to [0, 1]"));
    }
    for g in 0..2 {
        if batch.group_size(g) == 0 {
            return Err(Error::EmptyGroup(g));
        }
    }
    let gap = min_half_gap(batch);
    if cfg.eps_tol >= gap {
        return Err(Error::invalid(format!(
            "eps_tol {} must be below half the smallest gap between observed values ({gap})",
            cfg.eps_tol
        )));
    }
    let big_m = cfg.counting_big_m(n)?;
    let eps = cfg.eps_tol;
    let depth = cfg.depth;
    let (nb, nl) = (n_branches(depth), n_leaves(depth));
    let (labels, groups) = (batch.labels(), batch.groups());
    let y = |i: usize| f64::from(labels[i]);
    let s = |i: usize| f64::from(u8::from(groups[i] != 0));

    let mut b = Builder { vars: Vec::new(), constraints: Vec::new() };

    let p: Vec<Vec<usize>> = (0..nb)
        .map(|v| (0..d).map(|j| b.binary(format!("p_v{v}_j{j}"))).collect())
        .collect();
    let q: Vec<usize> = (0..nb)
        .map(|v| b.var(format!("q_v{v}"), VarKind::Continuous, -1.0, 1.0))
        .collect();
    let c: Vec<usize> = (0..nb).map(|v| b.binary(format!("c_v{v}"))).collect();
    let u: Vec<usize> = (0..nl).map(|l| b.binary(format!("u_l{l}"))).collect();
    // per sample: [w, w1, w2, wnm] at each branch node
    let mut w = vec![vec![[0usize; 4]; nb]; n];
    for (i, wi) in w.iter_mut().enumerate() {
        for (v, wv) in wi.iter_mut().enumerate() {
            *wv = [
                b.binary(format!("w_i{i}_v{v}")),
                b.binary(format!("w1_i{i}_v{v}")),
                b.binary(format!("w2_i{i}_v{v}")),
                b.binary(format!("wnm_i{i}_v{v}")),
            ];
        }
    }
    let z: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..nl).map(|l| b.binary(format!("z_i{i}_l{l}"))).collect())
        .collect();
    let loss: Vec<usize> = (0..nl).map(|l| b.nonneg(format!("loss_l{l}"))).collect();
    let families = FairFamily::for_metric(cfg.metric);
    let mut f_vars = Vec::new();
    for (_, f_name, _) in &families {
        let fam: Vec<[usize; 2]> = (0..nl)
            .map(|l| [b.nonneg(format!("{f_name}_l{l}_s0")), b.nonneg(format!("{f_name}_l{l}_s1"))])
            .collect();
        f_vars.push(fam);
    }
    let lfair: Vec<usize> = families.iter().map(|(_, _, name)| b.nonneg(name.to_string())).collect();

    // one-hot feature choice per branch node and leaf per sample
    for pv in &p {
        b.add("one_hot", pv.iter().map(|&k| (k, 1.0)).collect(), Sense::Eq, 1.0);
    }
    for zi in &z {
        b.add("one_hot", zi.iter().map(|&k| (k, 1.0)).collect(), Sense::Eq, 1.0);
    }

    let leaf_sets: Vec<(Vec<usize>, Vec<usize>)> = (0..nb).map(|v| descendant_leaves(depth, v)).collect();
    for i in 0..n {
        for v in 0..nb {
            let [wv, w1, w2, wnm] = w[i][v];
            // observed value of the chosen feature, zero when missing
            let observed_terms = |sign: f64| -> Vec<(usize, f64)> {
                (0..d)
                    .map(|j| (p[v][j], sign * batch.get(i, j).unwrap_or(0.0)))
                    .collect()
            };
            let missing_terms = |sign: f64| -> Vec<(usize, f64)> {
                (0..d)
                    .filter(|&j| batch.is_missing(i, j))
                    .map(|j| (p[v][j], sign))
                    .collect()
            };

            // wnm = 1 iff q >= observed value
            let mut t = vec![(q[v], 1.0)];
            t.extend(observed_terms(-1.0));
            t.push((wnm, -(SPLIT_BIG_M + eps)));
            b.add("branch_1", t, Sense::Le, -eps);
            let mut t = vec![(q[v], 1.0)];
            t.extend(observed_terms(-1.0));
            t.push((wnm, -SPLIT_BIG_M));
            b.add("branch_2", t, Sense::Ge, -SPLIT_BIG_M);

            // w1 = observed AND wnm
            let mut t = vec![(w1, 1.0)];
            t.extend(missing_terms(1.0));
            t.push((wnm, -1.0));
            b.add("branch_3", t, Sense::Ge, 0.0);
            let mut t = vec![(w1, 1.0)];
            t.extend(missing_terms(1.0));
            b.add("branch_4", t, Sense::Le, 1.0);
            b.add("branch_4", vec![(w1, 1.0), (wnm, -1.0)], Sense::Le, 0.0);

            // w2 = missing AND c
            let mut t = vec![(w2, 1.0)];
            t.extend(missing_terms(-1.0));
            t.push((c[v], -1.0));
            b.add("branch_5", t, Sense::Ge, -1.0);
            let mut t = vec![(w2, 1.0)];
            t.extend(missing_terms(-1.0));
            b.add("branch_5", t, Sense::Le, 0.0);
            b.add("branch_5", vec![(w2, 1.0), (c[v], -1.0)], Sense::Le, 0.0);

            // w = w1 OR w2
            b.add("branch_6", vec![(wv, 1.0), (w1, -1.0)], Sense::Ge, 0.0);
            b.add("branch_6", vec![(wv, 1.0), (w2, -1.0)], Sense::Ge, 0.0);
            b.add("branch_6", vec![(wv, 1.0), (w1, -1.0), (w2, -1.0)], Sense::Le, 0.0);

            // leaf reachable only along the branch direction
            let (left, right) = &leaf_sets[v];
            for &l in left {
                b.add("branch_7", vec![(z[i][l], 1.0), (wv, -1.0)], Sense::Le, 0.0);
            }
            for &l in right {
                b.add("branch_7", vec![(z[i][l], 1.0), (wv, 1.0)], Sense::Le, 1.0);
            }
        }
    }

    for l in 0..nl {
        let score: Vec<(usize, f64)> = (0..n).map(|i| (z[i][l], 2.0 * y(i) - 1.0)).collect();
        let mut t = score.clone();
        t.push((u[l], -(big_m + eps)));
        b.add("leaf_1", t, Sense::Le, -eps);
        let mut t = score;
        t.push((u[l], -big_m));
        b.add("leaf_2", t, Sense::Ge, -big_m);

        let negatives = |sign: f64| -> Vec<(usize, f64)> { (0..n).map(|i| (z[i][l], sign * (1.0 - y(i)))).collect() };
        let positives = |sign: f64| -> Vec<(usize, f64)> { (0..n).map(|i| (z[i][l], sign * y(i))).collect() };
        let mut t = vec![(loss[l], 1.0)];
        t.extend(negatives(-1.0));
        b.add("loss_1", t, Sense::Le, 0.0);
        let mut t = vec![(loss[l], 1.0)];
        t.extend(positives(-1.0));
        b.add("loss_1", t, Sense::Le, 0.0);
        let mut t = vec![(loss[l], 1.0)];
        t.extend(negatives(-1.0));
        t.push((u[l], -big_m));
        b.add("loss_2", t, Sense::Ge, -big_m);
        let mut t = vec![(loss[l], 1.0)];
        t.extend(positives(-1.0));
        t.push((u[l], big_m));
        b.add("loss_2", t, Sense::Ge, 0.0);
    }

    for ((family, _, _), fam) in families.iter().zip(&f_vars) {
        for l in 0..nl {
            for g in 0..2usize {
                let f = fam[l][g];
                let in_group = |i: usize| if g == 0 { 1.0 - s(i) } else { s(i) };
                // counts of this group's negatives / positives at the leaf
                let neg: Vec<(usize, f64)> = (0..n).map(|i| (z[i][l], -(1.0 - y(i)) * in_group(i))).collect();
                let pos: Vec<(usize, f64)> = (0..n).map(|i| (z[i][l], -y(i) * in_group(i))).collect();
                let (tags_u1, tags_u0) = if g == 0 {
                    (["fair_1", "fair_2"], "fair_3")
                } else {
                    (["fair_4", "fair_5"], "fair_6")
                };
                let keep_u1 = *family != FairFamily::Fnr;
                let keep_u0 = *family != FairFamily::Fpr;

                // f = negatives when u = 1
                let mut t = vec![(f, 1.0)];
                if keep_u1 {
                    t.extend(neg.iter().copied());
                }
                t.push((u[l], -big_m));
                b.add(tags_u1[0], t, Sense::Ge, -big_m);
                let mut t = vec![(f, 1.0)];
                if keep_u1 {
                    t.extend(neg.iter().copied());
                }
                t.push((u[l], big_m));
                b.add(tags_u1[1], t, Sense::Le, big_m + eps);

                // f = positives when u = 0
                let mut t = vec![(f, 1.0)];
                if keep_u0 {
                    t.extend(pos.iter().copied());
                }
                t.push((u[l], big_m));
                b.add(tags_u0, t, Sense::Ge, 0.0);
                let mut t = vec![(f, 1.0)];
                if keep_u0 {
                    t.extend(pos.iter().copied());
                }
                t.push((u[l], -big_m));
                b.add(tags_u0, t, Sense::Le, eps);
            }
        }
    }

    for (((family, _, _), fam), &lf) in families.iter().zip(&f_vars).zip(&lfair) {
        let inv = |g: u8| {
            let den = family.denominator(labels, groups, g);
            if den == 0 {
                0.0
            } else {
                1.0 / den as f64
            }
        };
        let (a0, a1) = (inv(0), inv(1));
        for (tag, sign) in [("lfair_1", 1.0), ("lfair_2", -1.0)] {
            let mut t = vec![(lf, 1.0)];
            for fl in fam {
                t.push((fl[0], -sign * a0));
                t.push((fl[1], sign * a1));
            }
            b.add(tag, t, Sense::Ge, 0.0);
        }
    }

    let mut objective: Vec<(usize, f64)> = loss.iter().map(|&k| (k, 1.0 / n as f64)).collect();
    objective.extend(lfair.iter().map(|&k| (k, cfg.lambda)));
    objective.retain(|&(_, c)| c != 0.0);

    Ok(MipProgram {
        shape: ProgramShape {
            n,
            d,
            depth,
            metric: cfg.metric,
            lambda: cfg.lambda,
            big_m,
            eps_tol: eps,
        },
        vars: b.vars,
        constraints: b.constraints,
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> TabularDataset {
        TabularDataset::from_rows(
            &[
                vec![Some(0.1), Some(0.5)],
                vec![None, Some(0.2)],
                vec![Some(0.6), None],
                vec![Some(0.9), Some(1.0)],
            ],
            vec![1, 0, 0, 1],
            vec![0, 0, 1, 1],
            vec!["a".into(), "b".into()],
        )
        .unwrap()
    }

    #[test]
    fn variable_counts() {
        let p = build_program(&tiny(), &ModelConfig::new(1, 0.5, FairnessMetric::FnrDiff)).unwrap();
        assert_eq!(p.n_binaries(), 29);
        assert_eq!(p.n_continuous(), 8);
        for (family, count) in [("p", 2), ("c", 1), ("u", 2), ("w", 4), ("w1", 4), ("w2", 4), ("wnm", 4), ("z", 8)] {
            assert_eq!(p.count_family(family), count, "{family}");
        }
        for (family, count) in [("q", 1), ("loss", 2), ("f", 4), ("lfair", 1)] {
            assert_eq!(p.count_family(family), count, "{family}");
        }
        let eo = build_program(&tiny(), &ModelConfig::new(1, 0.5, FairnessMetric::EqualizedOdds)).unwrap();
        assert_eq!(eo.n_continuous(), 1 + 2 + 8 + 2);
    }

    #[test]
    fn every_variable_is_constrained() {
        for metric in FairnessMetric::ALL {
            let p = build_program(&tiny(), &ModelConfig::new(2, 1.0, metric)).unwrap();
            let mut used = vec![false; p.vars.len()];
            for c in &p.constraints {
                for &(k, _) in &c.terms {
                    used[k] = true;
                }
            }
            assert!(used.iter().all(|&u| u), "{metric}");
        }
    }

    #[test]
    fn lambda_zero_objective_is_mean_loss() {
        let p = build_program(&tiny(), &ModelConfig::new(1, 0.0, FairnessMetric::FnrDiff)).unwrap();
        assert_eq!(p.objective.len(), 2);
        for &(k, c) in &p.objective {
            assert!(p.vars[k].name.starts_with("loss_"));
            assert_eq!(c, 0.25);
        }
    }

    #[test]
    fn fnr_denominators_are_group_positives() {
        let p = build_program(&tiny(), &ModelConfig::new(1, 1.0, FairnessMetric::FnrDiff)).unwrap();
        let c = p.constraints.iter().find(|c| c.tag == "lfair_1").unwrap();
        let coef = |name: &str| {
            let k = p.var_index(name).unwrap();
            c.terms.iter().find(|t| t.0 == k).unwrap().1
        };
        // one positive per group
        assert_eq!(coef("f_l0_s0"), -1.0);
        assert_eq!(coef("f_l0_s1"), 1.0);
    }

    #[test]
    fn descendant_leaf_sets() {
        assert_eq!(descendant_leaves(2, 0), (vec![0, 1], vec![2, 3]));
        assert_eq!(descendant_leaves(2, 2), (vec![2], vec![3]));
        assert_eq!(descendant_leaves(1, 0), (vec![0], vec![1]));
    }

    #[test]
    fn rejects_invalid_batches() {
        let cfg = ModelConfig::new(1, 0.5, FairnessMetric::FnrDiff);
        assert!(build_program(&tiny().select_rows(&[]), &cfg).is_err());
        assert!(matches!(build_program(&tiny().select_rows(&[0, 1]), &cfg), Err(Error::EmptyGroup(1))));
        let unscaled = TabularDataset::from_rows(
            &[vec![Some(3.0)], vec![Some(0.0)]],
            vec![0, 1],
            vec![0, 1],
            vec!["a".into()],
        )
        .unwrap();
        assert!(build_program(&unscaled, &cfg).is_err());
        let coarse_eps = ModelConfig { eps_tol: 0.3, ..cfg };
        assert!(build_program(&tiny(), &coarse_eps).is_err());
    }
}
