#![allow(dead_code)]

use fairmip::dataset::TabularDataset;
use fairmip::metrics::{ConfusionByGroup, FairnessMetric};
use fairmip::tree::{Branch, MiaTree, SENTINEL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random batch with values on a `1/steps` grid, missing cells at rate `p_missing`,
/// and both groups present.
pub fn random_batch(rng: &mut impl Rng, n: usize, d: usize, steps: u32, p_missing: f64) -> TabularDataset {
    assert!(n >= 2);
    let rows: Vec<Vec<Option<f64>>> = (0..n)
        .map(|_| {
            (0..d)
                .map(|_| (!rng.random_bool(p_missing)).then(|| f64::from(rng.random_range(0..=steps)) / f64::from(steps)))
                .collect()
        })
        .collect();
    let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect();
    let mut groups: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect();
    groups[0] = 0;
    groups[1] = 1;
    let names = (0..d).map(|j| format!("x{j}")).collect();
    TabularDataset::from_rows(&rows, labels, groups, names).unwrap()
}

/// Every threshold that can separate observed values of feature `j`: the sentinel and
/// each distinct observed value (`x <= v`).
fn oracle_thresholds(ds: &TabularDataset, j: usize) -> Vec<f64> {
    let mut vals: Vec<f64> = (0..ds.n_rows()).filter_map(|i| ds.get(i, j)).collect();
    vals.sort_by(f64::total_cmp);
    vals.dedup();
    std::iter::once(SENTINEL).chain(vals).collect()
}

fn all_branches(ds: &TabularDataset) -> Vec<Branch> {
    let mut out = Vec::new();
    for j in 0..ds.n_features() {
        for t in oracle_thresholds(ds, j) {
            for missing_left in [false, true] {
                out.push(Branch { feature: j, threshold: t, missing_left });
            }
        }
    }
    out
}

/// Objective computed from scratch: route each row by hand, label leaves by majority
/// (ties to 1), then `errors / n + lambda * fairness`.
pub fn oracle_objective(ds: &TabularDataset, branches: &[Branch], lambda: f64, metric: FairnessMetric) -> f64 {
    let nb = branches.len();
    let nl = nb + 1;
    let leaf_of = |i: usize| {
        let mut v = 0;
        while v < nb {
            let b = &branches[v];
            let left = match ds.get(i, b.feature) {
                None => b.missing_left,
                Some(x) => x <= b.threshold,
            };
            v = if left { 2 * v + 1 } else { 2 * v + 2 };
        }
        v - nb
    };
    let leaves: Vec<usize> = (0..ds.n_rows()).map(leaf_of).collect();
    let mut pos = vec![0usize; nl];
    let mut neg = vec![0usize; nl];
    for (i, &l) in leaves.iter().enumerate() {
        if ds.labels()[i] == 1 {
            pos[l] += 1;
        } else {
            neg[l] += 1;
        }
    }
    let preds: Vec<u8> = leaves.iter().map(|&l| u8::from(pos[l] >= neg[l])).collect();
    let errors = preds.iter().zip(ds.labels()).filter(|(p, y)| p != y).count();
    let mut obj = errors as f64 / ds.n_rows() as f64;
    if lambda != 0.0 {
        obj += lambda * ConfusionByGroup::from_predictions(&preds, ds.labels(), ds.groups()).unwrap().fairness(metric);
    }
    obj
}

/// Exhaustive minimum over all trees of the given depth (1 or 2).
pub fn oracle_minimum(ds: &TabularDataset, depth: usize, lambda: f64, metric: FairnessMetric) -> f64 {
    let cands = all_branches(ds);
    let mut best = f64::INFINITY;
    match depth {
        1 => {
            for b in &cands {
                best = best.min(oracle_objective(ds, std::slice::from_ref(b), lambda, metric));
            }
        }
        2 => {
            for a in &cands {
                for b in &cands {
                    for c in &cands {
                        best = best.min(oracle_objective(ds, &[*a, *b, *c], lambda, metric));
                    }
                }
            }
        }
        _ => panic!("oracle supports depth 1 and 2"),
    }
    best
}

/// Random tree whose thresholds are the sentinel or midpoints between observed values.
pub fn random_tree(rng: &mut impl Rng, ds: &TabularDataset, depth: usize) -> MiaTree {
    let nb = (1 << depth) - 1;
    let branches = (0..nb)
        .map(|_| {
            let feature = rng.random_range(0..ds.n_features());
            let cands = fairmip::tree::enumerate_candidates(ds, feature).unwrap();
            let c = cands[rng.random_range(0..cands.len())];
            Branch { feature, threshold: c.threshold, missing_left: rng.random_bool(0.5) }
        })
        .collect();
    let t = MiaTree::new(depth, branches, vec![0; nb + 1], ds.feature_names().to_vec()).unwrap();
    fairmip::tree::fit_leaves(&t, ds).unwrap()
}

pub fn random_metric(rng: &mut impl Rng) -> FairnessMetric {
    FairnessMetric::ALL[rng.random_range(0..FairnessMetric::ALL.len())]
}
