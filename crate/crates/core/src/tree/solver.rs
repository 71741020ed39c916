//! Anytime branch-and-bound over tree structures.
//!
//! Branch nodes are assigned in breadth-first order. Once a structure is fixed, routing
//! and majority leaf labels follow, so the search only enumerates one
//! `(feature, threshold, missing direction)` per branch node. At each node, candidates
//! inducing the same partition of the rows reaching it are merged (keeping the
//! lexicographically smallest), which leaves the optimum unchanged.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    enumerate_candidates, evaluate_objective, fit_leaves, lex_cmp_seq, majority_label, n_branches,
    n_leaves, objective_from_confusion, Branch, Candidate, MiaTree,
};
use crate::dataset::TabularDataset;
use crate::metrics::{ConfusionByGroup, FairnessMetric};
use crate::mip::ModelConfig;
use crate::{Error, Result};

/// Order in which candidates are tried at each branch node.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeOrder {
    /// Ascending objective of the split taken as a one-level tree on the node's rows.
    #[default]
    Greedy,
    Lexicographic,
    /// Random permutation drawn from the solver seed.
    Shuffled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Wall-clock budget in seconds; `f64::INFINITY` searches to exhaustion.
    pub t_limit: f64,
    pub seed: u64,
    pub node_order: NodeOrder,
    /// Budget on candidate expansions. Unlike `t_limit` it makes truncated searches
    /// reproducible independently of machine speed.
    pub max_nodes: Option<u64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { t_limit: 60.0, seed: 0, node_order: NodeOrder::Greedy, max_nodes: None }
    }
}

impl SolverConfig {
    pub fn unlimited() -> Self {
        SolverConfig { t_limit: f64::INFINITY, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_limit.is_nan() || self.t_limit <= 0.0 {
            return Err(Error::invalid(format!("t_limit must be positive, got {}", self.t_limit)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncumbentUpdate {
    pub nodes: u64,
    pub elapsed: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub tree: MiaTree,
    pub objective: f64,
    pub proven_optimal: bool,
    pub nodes_explored: u64,
    pub wall_time: f64,
    /// Objective of the relabeled warm start, when one was given.
    pub warm_start_objective: Option<f64>,
    /// Every incumbent improvement, in order.
    pub trace: Vec<IncumbentUpdate>,
}

/// Counts `[group][label]` of the rows reaching one leaf.
type LeafStats = [[u32; 2]; 2];

fn leaf_errors(st: &LeafStats) -> usize {
    let pos = (st[0][1] + st[1][1]) as usize;
    let neg = (st[0][0] + st[1][0]) as usize;
    if majority_label(pos, neg) == 1 {
        neg
    } else {
        pos
    }
}

fn record_leaf(conf: &mut ConfusionByGroup, st: &LeafStats) {
    let pos = (st[0][1] + st[1][1]) as usize;
    let neg = (st[0][0] + st[1][0]) as usize;
    let label = majority_label(pos, neg);
    for (g, c) in conf.groups.iter_mut().enumerate() {
        let (y0, y1) = (st[g][0] as usize, st[g][1] as usize);
        if label == 1 {
            c.tp += y1;
            c.fp += y0;
        } else {
            c.fn_ += y1;
            c.tn += y0;
        }
    }
}

struct NodeCandidate {
    branch: Branch,
    left: Vec<u32>,
    right: Vec<u32>,
    stats: [LeafStats; 2],
    score: f64,
}

struct Search<'a> {
    batch: &'a TabularDataset,
    n: usize,
    nb: usize,
    global: Vec<Vec<Candidate>>,
    lambda: f64,
    metric: FairnessMetric,
    order: NodeOrder,
    seed: u64,

    node_rows: Vec<Vec<u32>>,
    leaf_stats: Vec<LeafStats>,
    assign: Vec<Branch>,
    lb_errors: usize,

    best: Option<(f64, Vec<Branch>)>,
    trace: Vec<IncumbentUpdate>,
    nodes: u64,
    start: Instant,
    deadline: Option<Duration>,
    max_nodes: Option<u64>,
    stopped: bool,
}

impl Search<'_> {
    fn stats_of(&self, rows: &[u32]) -> LeafStats {
        let mut st = [[0u32; 2]; 2];
        let (labels, groups) = (self.batch.labels(), self.batch.groups());
        for &i in rows {
            let i = i as usize;
            st[usize::from(groups[i] != 0)][labels[i] as usize] += 1;
        }
        st
    }

    fn candidates_at(&self, k: usize) -> Vec<NodeCandidate> {
        let rows = &self.node_rows[k];
        let d = self.batch.n_features();
        let mut seen_partitions: HashSet<Vec<u32>> = HashSet::new();
        let mut out = Vec::new();
        for j in 0..d {
            let mut observed: Vec<f64> = Vec::with_capacity(rows.len());
            let mut has_missing = false;
            for &i in rows {
                match self.batch.get(i as usize, j) {
                    Some(v) => observed.push(v),
                    None => has_missing = true,
                }
            }
            observed.sort_by(f64::total_cmp);
            let mut seen_keys: HashSet<(usize, bool)> = HashSet::new();
            for c in &self.global[j] {
                let n_left_observed = observed.partition_point(|&v| v <= c.threshold);
                if !seen_keys.insert((n_left_observed, has_missing && c.missing_left)) {
                    continue;
                }
                let branch = Branch { feature: j, threshold: c.threshold, missing_left: c.missing_left };
                let (left, right): (Vec<u32>, Vec<u32>) = rows.iter().partition(|&&i| {
                    let i = i as usize;
                    match self.batch.get(i, j) {
                        Some(v) => branch.goes_left(v, false),
                        None => branch.missing_left,
                    }
                });
                if !seen_partitions.insert(left.clone()) {
                    continue;
                }
                let stats = [self.stats_of(&left), self.stats_of(&right)];
                out.push(NodeCandidate { branch, left, right, stats, score: 0.0 });
            }
        }
        match self.order {
            NodeOrder::Lexicographic => {}
            NodeOrder::Greedy => {
                for c in &mut out {
                    let mut conf = ConfusionByGroup::default();
                    record_leaf(&mut conf, &c.stats[0]);
                    record_leaf(&mut conf, &c.stats[1]);
                    c.score = objective_from_confusion(&conf, self.n, self.lambda, self.metric);
                }
                // stable: equal scores keep lexicographic order
                out.sort_by(|a, b| a.score.total_cmp(&b.score));
            }
            NodeOrder::Shuffled => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                out.shuffle(&mut rng);
            }
        }
        out
    }

    fn out_of_budget(&self) -> bool {
        if self.best.is_none() {
            return false;
        }
        if self.max_nodes.is_some_and(|m| self.nodes >= m) {
            return true;
        }
        self.deadline.is_some_and(|d| self.start.elapsed() >= d)
    }

    fn offer(&mut self, objective: f64, seq: &[Branch]) {
        let better = match &self.best {
            None => true,
            Some((best, best_seq)) => {
                objective < *best || (objective == *best && lex_cmp_seq(seq, best_seq) == Ordering::Less)
            }
        };
        if better {
            self.best = Some((objective, seq.to_vec()));
            self.trace.push(IncumbentUpdate {
                nodes: self.nodes,
                elapsed: self.start.elapsed().as_secs_f64(),
                objective,
            });
        }
    }

    fn pruned(&self, k: usize) -> bool {
        let Some((best, best_seq)) = &self.best else {
            return false;
        };
        let lb = self.lb_errors as f64 / self.n as f64;
        lb > *best || (lb >= *best && lex_cmp_seq(&self.assign[..=k], &best_seq[..=k]) == Ordering::Greater)
    }

    fn complete(&mut self) {
        let mut conf = ConfusionByGroup::default();
        for st in &self.leaf_stats {
            record_leaf(&mut conf, st);
        }
        let objective = objective_from_confusion(&conf, self.n, self.lambda, self.metric);
        let seq = self.assign.clone();
        self.offer(objective, &seq);
    }

    fn dfs(&mut self, k: usize) {
        if k == self.nb {
            self.complete();
            return;
        }
        let bottom = 2 * k + 1 >= self.nb;
        for cand in self.candidates_at(k) {
            if self.out_of_budget() {
                self.stopped = true;
                return;
            }
            self.nodes += 1;
            self.assign[k] = cand.branch;
            let added = if bottom {
                let l = 2 * k + 1 - self.nb;
                self.leaf_stats[l] = cand.stats[0];
                self.leaf_stats[l + 1] = cand.stats[1];
                leaf_errors(&cand.stats[0]) + leaf_errors(&cand.stats[1])
            } else {
                self.node_rows[2 * k + 1] = cand.left;
                self.node_rows[2 * k + 2] = cand.right;
                0
            };
            self.lb_errors += added;
            if !self.pruned(k) {
                self.dfs(k + 1);
            }
            self.lb_errors -= added;
            if self.stopped {
                return;
            }
        }
    }
}

/// Minimizes `errors / n + lambda * fairness` over trees of `mcfg.depth` whose splits
/// come from [`enumerate_candidates`].
///
/// The first complete tree is always reached before budgets are checked, so a result
/// is returned even under a tiny `t_limit`. When the search space is exhausted,
/// `proven_optimal` is set and the objective is the exact minimum; among optimal trees
/// the lexicographically smallest split sequence is returned.
pub fn solve(
    batch: &TabularDataset,
    scfg: &SolverConfig,
    mcfg: &ModelConfig,
    warm_start: Option<&MiaTree>,
) -> Result<SolveResult> {
    let start = Instant::now();
    scfg.validate()?;
    mcfg.validate()?;
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if batch.n_features() == 0 {
        return Err(Error::invalid("no features to split on"));
    }
    if !batch.is_unit_scaled() {
        return Err(Error::invalid("solver expects features scaled to [0, 1]"));
    }
    for g in 0..2 {
        if batch.group_size(g) == 0 {
            return Err(Error::EmptyGroup(g));
        }
    }
    let depth = mcfg.depth;
    let nb = n_branches(depth);
    let global = (0..batch.n_features())
        .map(|j| enumerate_candidates(batch, j))
        .collect::<Result<Vec<_>>>()?;
    let placeholder = Branch { feature: 0, threshold: super::SENTINEL, missing_left: false };
    let mut node_rows = vec![Vec::new(); nb];
    node_rows[0] = (0..batch.n_rows() as u32).collect();

    let mut search = Search {
        batch,
        n: batch.n_rows(),
        nb,
        global,
        lambda: mcfg.lambda,
        metric: mcfg.metric,
        order: scfg.node_order,
        seed: scfg.seed,
        node_rows,
        leaf_stats: vec![[[0; 2]; 2]; n_leaves(depth)],
        assign: vec![placeholder; nb],
        lb_errors: 0,
        best: None,
        trace: Vec::new(),
        nodes: 0,
        start,
        deadline: scfg.t_limit.is_finite().then(|| Duration::from_secs_f64(scfg.t_limit)),
        max_nodes: scfg.max_nodes,
        stopped: false,
    };

    let mut warm_start_objective = None;
    if let Some(ws) = warm_start {
        if ws.depth != depth {
            return Err(Error::invalid(format!(
                "warm start has depth {}, expected {depth}",
                ws.depth
            )));
        }
        let relabeled = fit_leaves(ws, batch)?;
        let obj = evaluate_objective(&relabeled, batch, mcfg.lambda, mcfg.metric)?;
        warm_start_objective = Some(obj);
        search.offer(obj, &relabeled.branches);
    }

    search.dfs(0);

    let (objective, branches) = search
        .best
        .clone()
        .ok_or_else(|| Error::Internal("search finished without an incumbent".into()))?;
    let unlabeled = MiaTree {
        depth,
        branches,
        leaves: vec![1; n_leaves(depth)],
        feature_names: batch.feature_names().to_vec(),
    };
    let tree = fit_leaves(&unlabeled, batch)?;
    Ok(SolveResult {
        tree,
        objective,
        proven_optimal: !search.stopped,
        nodes_explored: search.nodes,
        wall_time: start.elapsed().as_secs_f64(),
        warm_start_objective,
        trace: search.trace,
    })
}
