//! Command-line front end. [`run`] parses arguments, executes one subcommand and
//! returns the process exit code.

pub mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

pub use config::{config_hash, DataConfig, MipConfig, RunConfig, SweepConfig, TheoryConfig};

use crate::dataset::{
    inject_missingness, load_csv, load_feature_matrix, sample_batch, BatchSpec, MissingnessSpec, RawTable,
};
use crate::forest::{self, ForestModel};
use crate::metrics::FairnessMetric;
use crate::mip::{build_program, export_lp};
use crate::theory;
use crate::Error;

/// Process exit codes. The numeric values are stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Usage = 1,
    Data = 2,
    Internal = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn of(e: &Error) -> ExitStatus {
        match e {
            Error::InvalidArgument(_) => ExitStatus::Usage,
            Error::Internal(_) => ExitStatus::Internal,
            _ => ExitStatus::Data,
        }
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Lib(Error),
    Failed(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn status(&self) -> ExitStatus {
        match self {
            CliError::Usage(_) => ExitStatus::Usage,
            CliError::Lib(e) => ExitStatus::of(e),
            CliError::Failed(_) => ExitStatus::Internal,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failed(m) => f.write_str(m),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "fairmip", version, about = "Fair MIA decision-tree forests on data with missing values")]
struct Cli {
    /// JSON run configuration; unknown keys are rejected
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the config seeds (injection, theory suite and training)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: config `out_dir`, else the current directory)
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Token marking missing cells in CSV input and output
    #[arg(long, global = true, value_name = "STR")]
    na_token: Option<String>,
    /// Only log warnings and errors
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    Adult,
    Compas,
}

#[derive(Debug, Args)]
struct TrainOverrides {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    metric: Option<FairnessMetric>,
    #[arg(long)]
    n_tree: Option<usize>,
    /// Per-tree solver budget in seconds
    #[arg(long)]
    t_limit: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    /// Per-tree cap on solver expansions
    #[arg(long)]
    max_nodes: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Erase feature cells with per-group probabilities and write the corrupted CSV
    Inject {
        #[arg(long)]
        input: PathBuf,
        /// MissingnessSpec JSON (default: config `missingness`)
        #[arg(long, conflicts_with = "preset")]
        spec: Option<PathBuf>,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// Output CSV (default: OUT/<input stem>.injected.csv)
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train a forest and write model.json and train_log.json
    Train {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        overrides: TrainOverrides,
    },
    /// Write one prediction per input row to predictions.csv
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Write accuracy and fairness metrics of a model to evaluation.json
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Fairness-accuracy trade-off over a lambda grid, written to tradeoff.csv
    Sweep {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated lambda grid (default: config `sweep.lambdas`)
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
        #[arg(long)]
        repetitions: Option<usize>,
        #[arg(long)]
        test_fraction: Option<f64>,
        #[command(flatten)]
        overrides: TrainOverrides,
    },
    /// Run the imputation-fairness theory checks; exit 3 if any fails
    VerifyTheory {
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Summarize a dataset or model; optionally export the program of one batch
    Inspect {
        #[arg(long, required_unless_present = "model")]
        data: Option<PathBuf>,
        #[arg(long, conflicts_with = "data")]
        model: Option<PathBuf>,
        /// Write the mixed-integer program of a training batch in LP format
        #[arg(long, requires = "data", value_name = "PATH")]
        export_lp: Option<PathBuf>,
        /// `--batch-size` sets the rows in the exported batch (default: min(train.batch_size, n))
        #[command(flatten)]
        overrides: TrainOverrides,
    },
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
}

impl Ctx {
    fn out_path(&self, name: &str) -> CliResult<PathBuf> {
        std::fs::create_dir_all(&self.out).map_err(|e| Error::io(&self.out, e))?;
        Ok(self.out.join(name))
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> CliResult {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::io("<stdout>", e).into()),
        _ => Ok(()),
    }
}

macro_rules! outln {
    ($($t:tt)*) => {
        emit(&format!("{}\n", format_args!($($t)*)))?
    };
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn write_text(path: &Path, text: &str) -> CliResult {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn apply_overrides(cfg: &mut RunConfig, o: &TrainOverrides) -> CliResult {
    let t = &mut cfg.train;
    if let Some(v) = o.lambda {
        t.lambda = v;
    }
    if let Some(v) = o.metric {
        t.metric = v;
    }
    if let Some(v) = o.n_tree {
        t.n_tree = v;
    }
    if let Some(v) = o.t_limit {
        t.t_limit = v;
    }
    if let Some(v) = o.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = o.depth {
        t.depth = v;
    }
    if o.max_nodes.is_some() {
        t.max_nodes = o.max_nodes;
    }
    cfg.validate().map_err(CliError::Usage)
}

fn cmd_inject(
    ctx: &Ctx,
    input: &Path,
    spec: Option<&Path>,
    preset: Option<Preset>,
    output: Option<&Path>,
) -> CliResult {
    let spec = match (spec, preset) {
        (Some(p), _) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str::<MissingnessSpec>(&text).map_err(Error::from)?
        }
        (None, Some(Preset::Adult)) => MissingnessSpec::adult(),
        (None, Some(Preset::Compas)) => MissingnessSpec::compas(),
        (None, None) => ctx.cfg.missingness.clone(),
    };
    let opts = ctx.cfg.data.csv_options();
    let load = load_csv(input, &opts)?;
    let injected = inject_missingness(&load.dataset, &spec, ctx.cfg.seed)?;

    let mut raw = RawTable::read(input, opts.delimiter_byte()?)?;
    let mut erased = 0usize;
    for (r, &rec) in load.kept_rows.iter().enumerate() {
        for (j, &col) in load.feature_columns.iter().enumerate() {
            if injected.is_missing(r, j) && !load.dataset.is_missing(r, j) {
                raw.records[rec][col] = opts.na_token.clone();
                erased += 1;
            }
        }
    }
    let output = match output {
        Some(p) => p.to_path_buf(),
        None => {
            let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("data");
            ctx.out_path(&format!("{stem}.injected.csv"))?
        }
    };
    raw.write(&output, opts.delimiter_byte()?)?;
    log::info!("wrote {} ({erased} cells erased)", output.display());

    let report = injected.missingness_report();
    let targets: Vec<_> = spec
        .entries
        .iter()
        .map(|e| {
            let f = report.feature(&e.feature).expect("injection validated the feature");
            json!({
                "feature": e.feature,
                "target": [e.p0, e.p1],
                "rate": [f.group0.rate, f.group1.rate],
                "se": [f.group0.se, f.group1.se],
            })
        })
        .collect();
    let doc = json!({
        "input": input,
        "output": output,
        "seed": ctx.cfg.seed,
        "erased_cells": erased,
        "spec": spec,
        "targets": targets,
        "report": report,
    });
    let mut report_path = output.clone().into_os_string();
    report_path.push(".report.json");
    write_json(Path::new(&report_path), &doc)
}

fn load_training(ctx: &Ctx, data: &Path) -> CliResult<crate::TabularDataset> {
    let load = load_csv(data, &ctx.cfg.data.csv_options())?;
    if load.dropped_rows > 0 {
        log::warn!("dropped {} rows with a missing label or group", load.dropped_rows);
    }
    Ok(load.dataset)
}

fn cmd_train(ctx: &Ctx, data: &Path) -> CliResult {
    let ds = load_training(ctx, data)?.scale_unit_interval()?;
    let (model, log) = forest::train_with_log(&ds, &ctx.cfg.train)?;
    forest::save(&model, ctx.out_path("model.json")?)?;
    write_json(&ctx.out_path("train_log.json")?, &log)?;
    outln!(
        "trained {} trees: solver time {:.2}s of {:.0}s budget, {} proven optimal",
        model.trees.len(),
        log.total_solver_time,
        log.budget,
        log.trees.iter().filter(|t| t.proven_optimal).count()
    );
    Ok(())
}

fn cmd_predict(ctx: &Ctx, model: &Path, data: &Path) -> CliResult {
    let m = forest::load(model)?;
    let raw = load_feature_matrix(data, &ctx.cfg.data.csv_options(), &m.feature_names)?;
    let preds = forest::predict_majority(&m, &m.prepare(&raw)?)?;
    let mut out = String::from("row,prediction\n");
    for (i, p) in preds.iter().enumerate() {
        out.push_str(&format!("{i},{p}\n"));
    }
    write_text(&ctx.out_path("predictions.csv")?, &out)
}

/// Evaluation document written by `evaluate`.
pub fn evaluation_document(m: &ForestModel, data_cfg: &DataConfig, report: &forest::EvalReport) -> serde_json::Value {
    json!({
        "config_hash": config_hash(&(&m.config, data_cfg)),
        "n_trees": m.trees.len(),
        "report": report,
    })
}

fn cmd_evaluate(ctx: &Ctx, model: &Path, data: &Path) -> CliResult {
    let m = forest::load(model)?;
    let ds = load_training(ctx, data)?;
    let report = forest::evaluate(&m, &m.prepare(&ds)?)?;
    outln!(
        "accuracy {:.4}, accuracy_diff {:.4}, fpr_diff {:.4}, fnr_diff {:.4}, equalized_odds {:.4}",
        report.summary.accuracy,
        report.summary.accuracy_diff,
        report.summary.fpr_diff,
        report.summary.fnr_diff,
        report.summary.equalized_odds
    );
    write_json(&ctx.out_path("evaluation.json")?, &evaluation_document(&m, &ctx.cfg.data, &report))
}

fn cmd_sweep(ctx: &Ctx, data: &Path) -> CliResult {
    let ds = load_training(ctx, data)?;
    let s = &ctx.cfg.sweep;
    let res = forest::sweep_lambda(&ds, &ctx.cfg.train, &s.lambdas, s.repetitions, s.test_fraction)?;
    let csv = res.to_csv();
    emit(&csv)?;
    write_text(&ctx.out_path("tradeoff.csv")?, &csv)?;
    write_text(&ctx.out_path("tradeoff_runs.csv")?, &res.runs_csv())
}

fn cmd_verify_theory(ctx: &Ctx, inject_fault: bool) -> CliResult {
    let mut report = theory::run_all(&ctx.cfg.suite_options())?;
    if inject_fault {
        if let Some(c) = report.checks.first_mut() {
            c.pass = false;
        }
        report.all_pass = false;
    }
    let text = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    outln!("{text}");
    write_json(&ctx.out_path("theory.json")?, &report)?;
    if report.all_pass {
        Ok(())
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        Err(CliError::Failed(format!("theory checks failed: {}", failed.join(", "))))
    }
}

fn cmd_inspect(ctx: &Ctx, data: Option<&Path>, model: Option<&Path>, export: Option<&Path>, batch_size: Option<usize>) -> CliResult {
    if let Some(model) = model {
        let m = forest::load(model)?;
        let doc = json!({
            "schema_version": m.schema_version,
            "n_trees": m.trees.len(),
            "depth": m.trees[0].depth,
            "feature_names": m.feature_names,
            "config": m.config,
            "config_hash": config_hash(&m.config),
        });
        outln!("{}", serde_json::to_string_pretty(&doc).map_err(Error::from)?);
        return Ok(());
    }
    let data = data.ok_or_else(|| CliError::Usage("inspect needs --data or --model".into()))?;
    let ds = load_training(ctx, data)?;
    let positives = ds.labels().iter().filter(|&&y| y == 1).count();
    let doc = json!({
        "n_rows": ds.n_rows(),
        "n_features": ds.n_features(),
        "feature_names": ds.feature_names(),
        "group_sizes": [ds.group_size(0), ds.group_size(1)],
        "positive_rate": positives as f64 / ds.n_rows() as f64,
        "missing_cells": ds.count_missing(),
        "missingness": ds.missingness_report(),
    });
    outln!("{}", serde_json::to_string_pretty(&doc).map_err(Error::from)?);
    if let Some(path) = export {
        let scaled = ds.scale_unit_interval()?;
        let size = batch_size.unwrap_or(ctx.cfg.train.batch_size.min(ds.n_rows()));
        let batch = sample_batch(&scaled, BatchSpec { batch_size: size, seed: ctx.cfg.seed })?;
        let p = build_program(&batch, &ctx.cfg.model_config())?;
        export_lp(&p, path)?;
        outln!(
            "exported {} binaries, {} continuous, {} constraints to {}",
            p.n_binaries(),
            p.n_continuous(),
            p.constraints.len(),
            path.display()
        );
    }
    Ok(())
}

fn execute(cli: Cli) -> CliResult {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(CliError::Usage)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
        cfg.train.seed = s;
    }
    if let Some(t) = &cli.na_token {
        cfg.data.na_token = t.clone();
    }
    let out = cli.out.clone().or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    let mut ctx = Ctx { cfg, out };
    match &cli.command {
        Command::Inject { input, spec, preset, output } => {
            cmd_inject(&ctx, input, spec.as_deref(), *preset, output.as_deref())
        }
        Command::Train { data, overrides } => {
            apply_overrides(&mut ctx.cfg, overrides)?;
            cmd_train(&ctx, data)
        }
        Command::Predict { model, data } => cmd_predict(&ctx, model, data),
        Command::Evaluate { model, data } => cmd_evaluate(&ctx, model, data),
        Command::Sweep { data, lambdas, repetitions, test_fraction, overrides } => {
            if let Some(l) = lambdas {
                ctx.cfg.sweep.lambdas = l.clone();
            }
            if let Some(r) = repetitions {
                ctx.cfg.sweep.repetitions = *r;
            }
            if let Some(f) = test_fraction {
                ctx.cfg.sweep.test_fraction = *f;
            }
            if ctx.cfg.sweep.lambdas.is_empty() {
                return Err(CliError::Usage("lambda list is empty".into()));
            }
            apply_overrides(&mut ctx.cfg, overrides)?;
            cmd_sweep(&ctx, data)
        }
        Command::VerifyTheory { inject_fault } => cmd_verify_theory(&ctx, *inject_fault),
        Command::Inspect { data, model, export_lp, overrides } => {
            apply_overrides(&mut ctx.cfg, overrides)?;
            cmd_inspect(&ctx, data.as_deref(), model.as_deref(), export_lp.as_deref(), overrides.batch_size)
        }
    }
}

/// Runs one command line (including the program name) and returns its exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitStatus::Usage.code() } else { ExitStatus::Success.code() };
        }
    };
    let level = if cli.quiet { log::LevelFilter::Warn } else { log::LevelFilter::Info };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_env("FAIRMIP_LOG")
        .format_timestamp(None)
        .try_init();
    log::set_max_level(level);
    match execute(cli) {
        Ok(()) => ExitStatus::Success.code(),
        Err(e) => {
            eprintln!("error: {e}");
            e.status().code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes() {
        assert_eq!(ExitStatus::of(&Error::UnknownFeature("x".into())), ExitStatus::Data);
        assert_eq!(ExitStatus::of(&Error::invalid("x")), ExitStatus::Usage);
        assert_eq!(ExitStatus::of(&Error::Internal("x".into())), ExitStatus::Internal);
        assert_eq!(run(["fairmip", "no-such-command"]), 1);
        assert_eq!(run(["fairmip", "--help"]), 0);
    }

    #[test]
    fn lambda_string_parses() {
        let cli = Cli::try_parse_from(["fairmip", "train", "--data", "x.csv", "--lambda", "0.5"]).unwrap();
        match cli.command {
            Command::Train { overrides, .. } => assert_eq!(overrides.lambda, Some(0.5)),
            _ => unreachable!(),
        }
        let cli = Cli::try_parse_from(["fairmip", "sweep", "--data", "x.csv", "--lambdas", "0.1,0.14,0.17,0.5,0.8,2.0"])
            .unwrap();
        match cli.command {
            Command::Sweep { lambdas, .. } => assert_eq!(lambdas.unwrap(), vec![0.1, 0.14, 0.17, 0.5, 0.8, 2.0]),
            _ => unreachable!(),
        }
    }
}
