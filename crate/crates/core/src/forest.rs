//! Forest training from mini-batches, majority-vote prediction, evaluation and
//! fairness-accuracy sweeps.
//!
//! Trees are trained one after another: tree `i` is solved on its own stratified batch
//! and seeded with tree `i - 1` as a warm start.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{sample_batch, train_test_split, BatchSpec, FeatureScale, TabularDataset};
use crate::metrics::{FairnessMetric, FairnessSummary};
use crate::mip::ModelConfig;
use crate::tree::{evaluate_objective, solve, MiaTree, NodeOrder, SolverConfig};
use crate::{Error, Result};

pub const SCHEMA_VERSION: &str = "fairmip-forest/1";

/// Environment variable capping the worker threads used by sweeps and prediction.
pub const THREADS_ENV: &str = "FAIRMIP_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub n_tree: usize,
    /// Per-tree solver budget in seconds.
    pub t_limit: f64,
    pub batch_size: usize,
    pub lambda: f64,
    pub metric: FairnessMetric,
    pub depth: usize,
    pub seed: u64,
    /// Per-tree cap on solver expansions; with it, training is reproducible
    /// regardless of machine speed.
    pub max_nodes: Option<u64>,
    pub node_order: NodeOrder,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_tree: 30,
            t_limit: 60.0,
            batch_size: 200,
            lambda: 0.5,
            metric: FairnessMetric::FnrDiff,
            depth: 3,
            seed: 0,
            max_nodes: None,
            node_order: NodeOrder::Greedy,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_tree == 0 {
            return Err(Error::invalid("n_tree must be at least 1"));
        }
        if !(self.t_limit.is_finite() && self.t_limit > 0.0) {
            return Err(Error::invalid(format!("t_limit must be finite and positive, got {}", self.t_limit)));
        }
        if self.batch_size < 4 {
            return Err(Error::invalid(format!("batch_size must be at least 4, got {}", self.batch_size)));
        }
        self.model_config().validate()
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig::new(self.depth, self.lambda, self.metric)
    }

    fn solver_config(&self, tree: usize) -> SolverConfig {
        SolverConfig {
            t_limit: self.t_limit,
            seed: derive_seed(self.seed, 2 * tree as u64 + 1),
            node_order: self.node_order,
            max_nodes: self.max_nodes,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `index` under `seed`: `splitmix64(seed ^ splitmix64(index))`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub schema_version: String,
    pub config: TrainConfig,
    pub trees: Vec<MiaTree>,
    /// Scaling fitted on the training data; `None` when it was supplied already in `[0, 1]`.
    pub scaling: Option<Vec<FeatureScale>>,
    pub feature_names: Vec<String>,
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeLog {
    pub tree: usize,
    pub batch_seed: u64,
    /// Index of the tree passed as warm start.
    pub warm_start_from: Option<usize>,
    pub warm_start_objective: Option<f64>,
    pub objective: f64,
    pub proven_optimal: bool,
    pub nodes_explored: u64,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub trees: Vec<TreeLog>,
    pub total_solver_time: f64,
    /// `n_tree * t_limit`.
    pub budget: f64,
    pub total_wall_time: f64,
}

pub fn train(ds: &TabularDataset, cfg: &TrainConfig) -> Result<ForestModel> {
    train_with_log(ds, cfg).map(|(m, _)| m)
}

pub fn train_with_log(ds: &TabularDataset, cfg: &TrainConfig) -> Result<(ForestModel, TrainLog)> {
    let start = Instant::now();
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !ds.is_unit_scaled() {
        return Err(Error::invalid("training data must be scaled to [0, 1]"));
    }
    for g in 0..2 {
        if ds.group_size(g) == 0 {
            return Err(Error::EmptyGroup(g));
        }
    }
    if ds.labels().iter().all(|&y| y == ds.labels()[0]) {
        return Err(Error::invalid("training data has a single label"));
    }
    let mcfg = cfg.model_config();
    let mut trees: Vec<MiaTree> = Vec::with_capacity(cfg.n_tree);
    let mut logs = Vec::with_capacity(cfg.n_tree);
    for i in 0..cfg.n_tree {
        let batch_seed = derive_seed(cfg.seed, 2 * i as u64);
        let batch = sample_batch(ds, BatchSpec { batch_size: cfg.batch_size, seed: batch_seed })?;
        let res = solve(&batch, &cfg.solver_config(i), &mcfg, trees.last())?;
        log::info!(
            "tree {}/{}: objective {:.6}, proven_optimal {}, {} nodes, {:.3}s",
            i + 1,
            cfg.n_tree,
            res.objective,
            res.proven_optimal,
            res.nodes_explored,
            res.wall_time
        );
        logs.push(TreeLog {
            tree: i,
            batch_seed,
            warm_start_from: i.checked_sub(1),
            warm_start_objective: res.warm_start_objective,
            objective: res.objective,
            proven_optimal: res.proven_optimal,
            nodes_explored: res.nodes_explored,
            wall_time: res.wall_time,
        });
        trees.push(res.tree);
    }
    let total_solver_time = logs.iter().map(|l| l.wall_time).sum();
    let model = ForestModel {
        schema_version: SCHEMA_VERSION.to_string(),
        config: cfg.clone(),
        trees,
        scaling: ds.scaling().map(<[FeatureScale]>::to_vec),
        feature_names: ds.feature_names().to_vec(),
    };
    let log = TrainLog {
        trees: logs,
        total_solver_time,
        budget: cfg.n_tree as f64 * cfg.t_limit,
        total_wall_time: start.elapsed().as_secs_f64(),
    };
    Ok((model, log))
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::invalid(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Error::Internal(format!("thread pool: {e}")))
}

impl ForestModel {
    /// Brings raw data into the model's feature space: columns are matched by name
    /// and the training scaling is applied.
    pub fn prepare(&self, raw: &TabularDataset) -> Result<TabularDataset> {
        if raw.feature_names() != self.feature_names.as_slice() {
            if raw.n_features() != self.feature_names.len() {
                return Err(Error::DimensionMismatch { expected: self.feature_names.len(), got: raw.n_features() });
            }
            return Err(Error::Schema(format!(
                "feature columns {:?} do not match the model's {:?}",
                raw.feature_names(),
                self.feature_names
            )));
        }
        match (&self.scaling, raw.scaling()) {
            (Some(s), None) => raw.apply_scaling(s),
            (Some(s), Some(r)) if s.as_slice() == r => Ok(raw.clone()),
            (Some(_), Some(_)) => Err(Error::Schema("data was scaled with a different scaling".into())),
            (None, _) if raw.is_unit_scaled() => Ok(raw.clone()),
            (None, _) => Err(Error::invalid("model has no scaling and data is not in [0, 1]")),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        match v.get("schema_version").and_then(|s| s.as_str()) {
            Some(SCHEMA_VERSION) => {}
            Some(other) => {
                return Err(Error::Schema(format!("model schema `{other}`, expected `{SCHEMA_VERSION}`")))
            }
            None => return Err(Error::Schema("model has no schema_version".into())),
        }
        let m: ForestModel = serde_json::from_value(v)?;
        m.check()?;
        Ok(m)
    }

    fn check(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::Schema("model has no trees".into()));
        }
        for t in &self.trees {
            if t.depth != self.trees[0].depth {
                return Err(Error::Schema("trees have different depths".into()));
            }
            t.validate(self.feature_names.len())?;
        }
        if let Some(s) = &self.scaling {
            if s.len() != self.feature_names.len() {
                return Err(Error::Schema("scaling length does not match features".into()));
            }
        }
        Ok(())
    }
}

pub fn save(m: &ForestModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = m.to_json()?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<ForestModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ForestModel::from_json(&text)
}

/// Majority vote over the trees; a tie predicts 1. `ds` must be in the model's
/// feature space (see [`ForestModel::prepare`]).
pub fn predict_majority(m: &ForestModel, ds: &TabularDataset) -> Result<Vec<u8>> {
    if ds.n_features() != m.feature_names.len() {
        return Err(Error::DimensionMismatch { expected: m.feature_names.len(), got: ds.n_features() });
    }
    m.check()?;
    let votes = |i: usize| -> u8 {
        let ones = m
            .trees
            .iter()
            .map(|t| usize::from(t.leaves[t.route_unchecked(ds.row_values(i), ds.row_mask(i))]))
            .sum::<usize>();
        u8::from(2 * ones >= m.trees.len())
    };
    let n = ds.n_rows();
    if n < 4096 {
        return Ok((0..n).map(votes).collect());
    }
    Ok(thread_pool()?.install(|| (0..n).into_par_iter().map(votes).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_rows: usize,
    #[serde(flatten)]
    pub summary: FairnessSummary,
    /// Each tree's `errors / n + lambda * fairness` on the evaluated data, with the
    /// model's lambda and metric.
    pub per_tree_objectives: Vec<f64>,
}

pub fn evaluate(m: &ForestModel, ds: &TabularDataset) -> Result<EvalReport> {
    let preds = predict_majority(m, ds)?;
    let summary = FairnessSummary::compute(&preds, ds.labels(), ds.groups())?;
    let per_tree_objectives = m
        .trees
        .iter()
        .map(|t| evaluate_objective(t, ds, m.config.lambda, m.config.metric))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport { n_rows: ds.n_rows(), summary, per_tree_objectives })
}

/// Test-set result of one (lambda, repetition) job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub lambda: f64,
    pub repetition: usize,
    pub split_seed: u64,
    pub accuracy: f64,
    pub metric_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub lambda: f64,
    pub accuracy: f64,
    pub accuracy_se: f64,
    pub metric: FairnessMetric,
    pub metric_value: f64,
    pub metric_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Sorted ascending by lambda.
    pub rows: Vec<TradeoffRow>,
    /// Ordered by lambda, then repetition.
    pub runs: Vec<SweepRun>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,accuracy,accuracy_se,metric,metric_value,metric_se\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.lambda,
                r.accuracy,
                r.accuracy_se,
                r.metric.as_str(),
                r.metric_value,
                r.metric_se
            ));
        }
        out
    }

    /// One line per run, for external plotting.
    pub fn runs_csv(&self) -> String {
        let mut out = String::from("lambda,repetition,split_seed,accuracy,metric_value\n");
        for r in &self.runs {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.lambda, r.repetition, r.split_seed, r.accuracy, r.metric_value
            ));
        }
        out
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Trains and evaluates one forest per `(lambda, repetition)`.
///
/// Repetition `r` splits `ds` with seed `derive_seed(cfg.seed, r)`; every lambda sees the
/// same splits and the same batch seeds. Unscaled data is scaled on each training side
/// and the test side reuses that scaling. Jobs run in parallel (see [`THREADS_ENV`]).
pub fn sweep_lambda(
    ds: &TabularDataset,
    cfg: &TrainConfig,
    lambdas: &[f64],
    repetitions: usize,
    test_fraction: f64,
) -> Result<SweepResult> {
    if lambdas.is_empty() {
        return Err(Error::invalid("lambda list is empty"));
    }
    if repetitions == 0 {
        return Err(Error::invalid("repetitions must be at least 1"));
    }
    let mut lambdas = lambdas.to_vec();
    for &l in &lambdas {
        if !(l.is_finite() && l >= 0.0) {
            return Err(Error::invalid(format!("lambda must be finite and >= 0, got {l}")));
        }
    }
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();
    cfg.validate()?;

    let splits = (0..repetitions)
        .map(|r| {
            let split_seed = derive_seed(cfg.seed, r as u64);
            let (train, test) = train_test_split(ds, test_fraction, split_seed)?;
            let (train, test) = if train.scaling().is_none() {
                let train = train.scale_unit_interval()?;
                let test = test.apply_scaling(train.scaling().expect("just scaled"))?;
                (train, test)
            } else {
                (train, test)
            };
            Ok((split_seed, train, test))
        })
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(f64, usize)> =
        lambdas.iter().flat_map(|&l| (0..repetitions).map(move |r| (l, r))).collect();
    let runs = thread_pool()?.install(|| {
        jobs.par_iter()
            .map(|&(lambda, r)| {
                let (split_seed, train_ds, test_ds) = &splits[r];
                let job_cfg = TrainConfig { lambda, seed: derive_seed(*split_seed, 1), ..cfg.clone() };
                let model = train(train_ds, &job_cfg)?;
                let report = evaluate(&model, test_ds)?;
                log::info!(
                    "sweep lambda {lambda} repetition {r}: accuracy {:.4}, {} {:.4}",
                    report.summary.accuracy,
                    cfg.metric,
                    report.summary.metric(cfg.metric)
                );
                Ok(SweepRun {
                    lambda,
                    repetition: r,
                    split_seed: *split_seed,
                    accuracy: report.summary.accuracy,
                    metric_value: report.summary.metric(cfg.metric),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let rows = lambdas
        .iter()
        .map(|&lambda| {
            let acc: Vec<f64> = runs.iter().filter(|r| r.lambda == lambda).map(|r| r.accuracy).collect();
            let met: Vec<f64> = runs.iter().filter(|r| r.lambda == lambda).map(|r| r.metric_value).collect();
            let (accuracy, accuracy_se) = mean_se(&acc);
            let (metric_value, metric_se) = mean_se(&met);
            TradeoffRow { lambda, accuracy, accuracy_se, metric: cfg.metric, metric_value, metric_se }
        })
        .collect();
    Ok(SweepResult { rows, runs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{Branch, SENTINEL};

    fn stump(feature: usize, threshold: f64, leaves: [u8; 2]) -> MiaTree {
        let b = Branch { feature, threshold, missing_left: true };
        MiaTree::new(1, vec![b], leaves.to_vec(), vec![]).unwrap()
    }

    fn model(trees: Vec<MiaTree>) -> ForestModel {
        ForestModel {
            schema_version: SCHEMA_VERSION.into(),
            config: TrainConfig::default(),
            trees,
            scaling: None,
            feature_names: vec!["a".into()],
        }
    }

    fn probe() -> TabularDataset {
        TabularDataset::from_rows(
            &[vec![Some(0.2)], vec![Some(0.8)], vec![None], vec![Some(0.9)]],
            vec![1, 0, 1, 0],
            vec![0, 0, 1, 1],
            vec!["a".into()],
        )
        .unwrap()
    }

    #[test]
    fn majority_and_ties() {
        let one = stump(0, SENTINEL, [1, 1]);
        let zero = stump(0, SENTINEL, [0, 0]);
        let ds = probe();
        assert_eq!(predict_majority(&model(vec![one.clone(), one.clone(), zero.clone()]), &ds).unwrap(), vec![1; 4]);
        assert_eq!(predict_majority(&model(vec![one.clone(), zero.clone()]), &ds).unwrap(), vec![1; 4]);
        assert_eq!(predict_majority(&model(vec![zero.clone(), zero, one]), &ds).unwrap(), vec![0; 4]);
        let t = stump(0, 0.5, [1, 0]);
        assert_eq!(predict_majority(&model(vec![t.clone()]), &ds).unwrap(), t.predict(&ds).unwrap());
    }

    #[test]
    fn constant_one_identities() {
        let r = evaluate(&model(vec![stump(0, SENTINEL, [1, 1])]), &probe()).unwrap();
        assert_eq!((r.summary.group0.fnr, r.summary.group1.fnr), (0.0, 0.0));
        assert_eq!((r.summary.group0.fpr, r.summary.group1.fpr), (1.0, 1.0));
        assert_eq!(r.summary.fpr_diff, 0.0);
        assert_eq!(r.summary.fnr_diff, 0.0);
        assert_eq!(r.summary.accuracy, 0.5);
    }

    #[test]
    fn perfect_forest() {
        let r = evaluate(&model(vec![stump(0, 0.5, [1, 0])]), &probe()).unwrap();
        assert_eq!(r.summary.accuracy, 1.0);
        assert_eq!(r.summary.equalized_odds + r.summary.accuracy_diff, 0.0);
        assert_eq!(r.per_tree_objectives, vec![0.0]);
    }

    #[test]
    fn schema_version_is_checked() {
        let m = model(vec![stump(0, 0.5, [1, 0])]);
        let text = m.to_json().unwrap();
        assert_eq!(ForestModel::from_json(&text).unwrap(), m);
        let wrong = text.replace(SCHEMA_VERSION, "fairmip-forest/0");
        assert!(matches!(ForestModel::from_json(&wrong), Err(Error::Schema(_))));
    }

    #[test]
    fn dimension_mismatch() {
        let m = model(vec![stump(0, 0.5, [1, 0])]);
        let ds = TabularDataset::from_rows(
            &[vec![Some(0.2), Some(0.1)]],
            vec![1],
            vec![0],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        assert!(matches!(predict_majority(&m, &ds), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = TrainConfig::default();
        assert_eq!((c.depth, c.n_tree, c.t_limit, c.batch_size), (3, 30, 60.0, 200));
        assert!(TrainConfig { n_tree: 0, ..c.clone() }.validate().is_err());
        assert!(TrainConfig { t_limit: f64::INFINITY, ..c.clone() }.validate().is_err());
        let parsed: TrainConfig = serde_json::from_str(r#"{"lambda": 0.5, "n_tree": 2}"#).unwrap();
        assert_eq!(parsed.n_tree, 2);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"lamda": 0.5}"#).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(derive_seed(0, 1), derive_seed(1, 0));
    }
}
