//! Command-line front end: `synth`, `train`, `eval`, `diagnose`, `compare`.
//!
//! Every subcommand writes into its `--out` directory and finishes by
//! writing `manifest.json`. Usage errors exit with 2, every other failure
//! with 1, and a structured one-line JSON message goes to stderr.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use saea_core::adjust::{power_iteration_radius, SpectralEstimate};
use saea_core::data::{NormalizeMode, SeriesFrame};
use saea_core::eval::{metrics_report, MetricsReport, MAPE_THRESHOLD};
use saea_core::forecaster::{Forecaster, ModelKind};
use saea_core::synth::{
    generate, oracle_predictions_from_frame, random_structural_phi, GraphSpec, SynthConfig, Tap,
};
use saea_core::train::{OptimizerKind, Selection};
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::config::{
    parse_minutes_list, parse_model, parse_normalize, parse_optimizer, parse_selection,
    ConfigLayer, KindChoice, RunConfig,
};
use crate::error::{CliError, CliResult};
use crate::experiment::{
    predict_frame, split_metrics, summarize, train_horizons, CompareRow, Dataset, HorizonSummary,
    RawSplits, SplitMetrics, SplitName, SystemClock, ACF_MAX_LAG,
};
use crate::format::{fmt_f64, to_json_string};
use crate::io::{
    ensure_dir, read_bytes, read_series, write_atomic, write_matrix, write_series, write_table,
};
use crate::manifest::RunManifest;

/// Comma-separated list of horizons in minutes.
#[derive(Debug, Clone, PartialEq)]
pub struct MinutesList(pub Vec<f64>);

impl FromStr for MinutesList {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        parse_minutes_list(s).map(MinutesList)
    }
}

/// Comma-separated list of non-negative integers.
#[derive(Debug, Clone, PartialEq)]
pub struct LagList(pub Vec<usize>);

impl FromStr for LagList {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| format!("bad lag {p:?}"))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(LagList)
    }
}

/// Comma-separated list of error-model kinds.
#[derive(Debug, Clone, PartialEq)]
pub struct KindList(pub Vec<KindChoice>);

impl FromStr for KindList {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|p| p.trim().parse())
            .collect::<Result<Vec<_>, _>>()
            .map(KindList)
    }
}

/// Comma-separated `a:b` signal taps, most recent lag first.
#[derive(Debug, Clone, PartialEq)]
pub struct TapList(pub Vec<Tap>);

impl FromStr for TapList {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|p| {
                let (a, b) = p
                    .trim()
                    .split_once(':')
                    .ok_or_else(|| format!("tap {p:?} is not a:b"))?;
                let a = a.trim().parse().map_err(|_| format!("bad tap {p:?}"))?;
                let b = b.trim().parse().map_err(|_| format!("bad tap {p:?}"))?;
                Ok(Tap { a, b })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(TapList)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "saea",
    version,
    about = "Spatiotemporally autocorrelated error adjustment for traffic forecasting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a synthetic bundle with a known error process.
    Synth(SynthArgs),
    /// Train one (forecaster, error model) pair per horizon.
    Train(TrainArgs),
    /// Score a checkpoint, or the oracle predictor of a synthetic bundle.
    Eval(EvalArgs),
    /// Residual covariance, cross-lag covariance and ACF of a checkpoint.
    Diagnose(DiagnoseArgs),
    /// Train the frozen baseline and each requested kind under one seed.
    Compare(CompareArgs),
}

/// Settings shared by `train` and `compare`.
#[derive(Debug, Args)]
struct RunArgs {
    /// Series CSV with header sensor_0,...,sensor_{N-1}.
    #[arg(long)]
    series: PathBuf,
    /// Headerless N x N adjacency CSV.
    #[arg(long)]
    adjacency: Option<PathBuf>,
    /// Config file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Penalty coefficient (default per kind).
    #[arg(long)]
    alpha: Option<f64>,
    /// Sparse weight for low_rank_sparse (default 1000).
    #[arg(long)]
    beta: Option<f64>,
    /// Rank for the low-rank kinds (default min(10, N)).
    #[arg(long)]
    rank: Option<usize>,
    /// VAR order of the error model, 1 or 2 [default: 1].
    #[arg(long)]
    var_order: Option<usize>,
    /// Horizons in minutes, comma separated [default: 15,30,45].
    #[arg(long)]
    horizon_min: Option<MinutesList>,
    /// Sampling interval in minutes [default: 5].
    #[arg(long)]
    step_min: Option<f64>,
    /// History length H [default: 12].
    #[arg(long)]
    history: Option<usize>,
    /// Training epochs [default: 300].
    #[arg(long)]
    epochs: Option<usize>,
    /// Learning rate [default: 5e-4].
    #[arg(long)]
    lr: Option<f64>,
    /// Batch size [default: 50].
    #[arg(long)]
    batch: Option<usize>,
    /// Seed for initialization and shuffling [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Base forecaster: node_ar, graph_filter_ar, mlp [default: graph_filter_ar].
    #[arg(long, value_parser = parse_model)]
    model: Option<ModelKind>,
    /// Hidden width of the MLP [default: 64].
    #[arg(long)]
    hidden: Option<usize>,
    /// Normalization: none or zscore [default: none].
    #[arg(long, value_parser = parse_normalize)]
    normalize: Option<NormalizeMode>,
    /// Optimizer: rmsprop or sgd [default: rmsprop].
    #[arg(long, value_parser = parse_optimizer)]
    optimizer: Option<OptimizerKind>,
    /// Parameter selection: best_validation or last_epoch [default: best_validation].
    #[arg(long, value_parser = parse_selection)]
    selection: Option<Selection>,
    /// Hop order of the structural mask, 1 or 2 [default: 1].
    #[arg(long)]
    mask_order: Option<usize>,
    /// Training fraction of the chronological split [default: 0.7].
    #[arg(long)]
    train_frac: Option<f64>,
    /// Validation fraction of the chronological split [default: 0.1].
    #[arg(long)]
    val_frac: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

impl RunArgs {
    fn layer(&self, kind: Option<KindChoice>) -> ConfigLayer {
        ConfigLayer {
            model: self.model,
            hidden: self.hidden,
            kind,
            alpha: self.alpha,
            beta: self.beta,
            rank: self.rank,
            squared_structural_penalty: None,
            mask_order: self.mask_order,
            var_order: self.var_order,
            history: self.history,
            horizon_min: self.horizon_min.as_ref().map(|m| m.0.clone()),
            step_minutes: self.step_min,
            epochs: self.epochs,
            learning_rate: self.lr,
            batch_size: self.batch,
            optimizer: self.optimizer,
            seed: self.seed,
            shuffle: None,
            grad_clip: None,
            selection: self.selection,
            normalize: self.normalize,
            train_frac: self.train_frac,
            val_frac: self.val_frac,
        }
    }

    fn file_layer(&self) -> CliResult<ConfigLayer> {
        match &self.config {
            Some(p) => {
                let bytes = read_bytes(p)?;
                let text = String::from_utf8(bytes).map_err(|_| {
                    CliError::Validation(format!("{}: config is not UTF-8", p.display()))
                })?;
                ConfigLayer::parse_str(&text)
                    .map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))
            }
            None => Ok(ConfigLayer::default()),
        }
    }

    fn add_inputs(&self, manifest: &mut RunManifest) -> CliResult<()> {
        manifest.add_input("series", &self.series)?;
        if let Some(p) = &self.adjacency {
            manifest.add_input("adjacency", p)?;
        }
        if let Some(p) = &self.config {
            manifest.add_input("config", p)?;
        }
        Ok(())
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Error-model kind: none, scalar, diagonal, sparse_full, low_rank,
    /// low_rank_sparse, structural [default: structural].
    #[arg(long)]
    kind: Option<KindChoice>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Kinds to compare, comma separated [default: none and all six kinds].
    #[arg(long)]
    kinds: Option<KindList>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Checkpoint written by `train`.
    #[arg(long, conflicts_with = "oracle", required_unless_present = "oracle")]
    checkpoint: Option<PathBuf>,
    /// Score the oracle predictor of a `synth` output directory instead.
    #[arg(long)]
    oracle: Option<PathBuf>,
    /// Series CSV (defaults to series.csv in the oracle directory).
    #[arg(long, required_unless_present = "oracle")]
    series: Option<PathBuf>,
    /// Segment to score.
    #[arg(long, value_enum, default_value = "test")]
    split: SplitName,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DiagnoseArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Series CSV.
    #[arg(long)]
    series: PathBuf,
    /// Segment to analyze.
    #[arg(long, value_enum, default_value = "test")]
    split: SplitName,
    /// Largest ACF lag.
    #[arg(long, default_value_t = ACF_MAX_LAG)]
    max_lag: usize,
    /// Cross-lag offsets, comma separated.
    #[arg(long, default_value = "0,1,2")]
    crosslag: LagList,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

/// Graph family accepted by `synth`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum GraphFamily {
    Path,
    Ring,
    Er,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Graph family.
    #[arg(long, value_enum, default_value = "ring")]
    graph: GraphFamily,
    /// Number of sensors.
    #[arg(long, default_value_t = 20)]
    sensors: usize,
    /// Edge probability for the Erdos-Renyi family.
    #[arg(long, default_value_t = 0.2)]
    p_edge: f64,
    /// Recorded steps (after a 200-step burn-in).
    #[arg(long, default_value_t = 5000)]
    steps: usize,
    /// Innovation standard deviation.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Diagonal magnitude of Phi* (its spectral radius).
    #[arg(long, default_value_t = 0.6)]
    radius: f64,
    /// Magnitude of Phi* on graph edges.
    #[arg(long, default_value_t = 0.5)]
    coupling: f64,
    /// Signal taps `self:neighbor`, most recent lag first.
    #[arg(long, default_value = "0.5:0.1,0.2:0")]
    taps: TapList,
    /// Constant level added to every sensor.
    #[arg(long, default_value_t = 0.0)]
    level: f64,
    /// Coefficient of a squared lag-1 term (model misspecification).
    #[arg(long, default_value_t = 0.0)]
    quadratic: f64,
    /// Sampling interval in minutes.
    #[arg(long, default_value_t = 5.0)]
    step_min: f64,
    /// Seed for the graph, Phi* and the innovations.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

/// Parse `argv` (program name first), run the subcommand and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let msg = serde_json::json!({ "error": e.category(), "message": e.to_string() });
            eprintln!("{msg}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Synth(a) => cmd_synth(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Diagnose(a) => cmd_diagnose(&a),
        Command::Compare(a) => cmd_compare(&a),
    }
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    write_atomic(path, to_json_string(value)?.as_bytes())
}

/// Horizon label used in file names (`15`, `7.5`).
fn minutes_label(m: f64) -> String {
    format!("{m}")
}

/// Merged layer and resolved config plus the loaded data.
fn setup(run: &RunArgs, kind: Option<KindChoice>) -> CliResult<(ConfigLayer, RunConfig, Dataset)> {
    let layer = run.layer(kind).overlay(run.file_layer()?);
    let step = layer.step_minutes.unwrap_or(5.0);
    let data = Dataset::load(&run.series, run.adjacency.as_deref(), step)?;
    let cfg = RunConfig::resolve(&layer, data.frame.sensors())?;
    Ok((layer, cfg, data))
}

/// Contents of `metrics.json` written by `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    /// Error-model kind.
    pub kind: KindChoice,
    /// Base forecaster.
    pub model: ModelKind,
    /// SHA-256 of the resolved configuration.
    pub config_sha256: String,
    /// One entry per horizon.
    pub horizons: Vec<HorizonSummary>,
}

fn failed_horizons(summaries: &[HorizonSummary]) -> Vec<String> {
    summaries
        .iter()
        .filter(|s| s.status != "ok")
        .map(|s| {
            format!(
                "{} min: {}",
                s.horizon_min,
                s.error.clone().unwrap_or_default()
            )
        })
        .collect()
}

fn cmd_train(a: &TrainArgs) -> CliResult<()> {
    let (_, cfg, data) = setup(&a.run, a.kind)?;
    let out = &a.run.out;
    ensure_dir(out)?;
    let mut manifest = RunManifest::begin("train", &cfg, cfg.seed)?;
    a.run.add_inputs(&mut manifest)?;

    let outcomes = train_horizons(&cfg, &data, &SystemClock::default())?;
    let summaries = summarize(&cfg, &data, &outcomes)?;
    for o in &outcomes {
        if let Ok((ck, report)) = &o.result {
            let label = minutes_label(o.horizon_min);
            let ck_path = out.join(format!("checkpoint_{label}min.json"));
            ck.save(&ck_path)?;
            manifest.add_output("checkpoint", &ck_path)?;
            let rep_path = out.join(format!("train_report_{label}min.json"));
            write_json(&rep_path, report)?;
            manifest.add_output("train_report", &rep_path)?;
        }
    }
    let metrics = TrainMetrics {
        kind: cfg.kind,
        model: cfg.model,
        config_sha256: cfg.sha256()?,
        horizons: summaries.clone(),
    };
    let metrics_path = out.join("metrics.json");
    write_json(&metrics_path, &metrics)?;
    manifest.add_output("metrics", &metrics_path)?;
    manifest.finish(out)?;

    for s in &summaries {
        if let Some(t) = &s.test {
            println!(
                "{} min: test RMSE {} MAPE {}%",
                s.horizon_min,
                fmt_f64(t.rmse),
                fmt_f64(t.mape_percent)
            );
        }
    }
    let failed = failed_horizons(&summaries);
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "training failed for {}",
            failed.join("; ")
        )))
    }
}

/// Contents of `compare.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareTable {
    /// SHA-256 of the shared configuration.
    pub config_sha256: String,
    /// One row per (kind, horizon).
    pub rows: Vec<CompareRow>,
}

#[derive(Debug, Serialize)]
struct CompareConfig<'a> {
    base: &'a RunConfig,
    kinds: &'a [KindChoice],
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn cmd_compare(a: &CompareArgs) -> CliResult<()> {
    let kinds = a
        .kinds
        .as_ref()
        .map(|k| k.0.clone())
        .unwrap_or_else(KindChoice::all);
    if kinds.is_empty() {
        return Err(CliError::Validation("no kinds requested".into()));
    }
    let (_, base, data) = setup(&a.run, Some(kinds[0]))?;
    let out = &a.run.out;
    ensure_dir(out)?;
    let mut manifest = RunManifest::begin(
        "compare",
        &CompareConfig {
            base: &base,
            kinds: &kinds,
        },
        base.seed,
    )?;
    a.run.add_inputs(&mut manifest)?;
    let file_layer = a.run.file_layer()?;

    let mut rows = Vec::new();
    for &kind in &kinds {
        let layer = a.run.layer(Some(kind)).overlay(file_layer.clone());
        let cfg = RunConfig::resolve(&layer, data.frame.sensors())?;
        let summaries = train_horizons(&cfg, &data, &SystemClock::default())
            .and_then(|o| summarize(&cfg, &data, &o))
            .unwrap_or_else(|e| {
                cfg.horizon_min
                    .iter()
                    .zip(cfg.horizon_steps().unwrap_or_default())
                    .map(|(&m, p)| HorizonSummary {
                        horizon_min: m,
                        horizon_step: p,
                        status: "failed".into(),
                        error: Some(e.to_string()),
                        best_epoch: None,
                        best_val_mse: None,
                        spectral_radius: None,
                        val: None,
                        test: None,
                    })
                    .collect()
            });
        for s in summaries {
            rows.push(CompareRow {
                kind,
                horizon_min: s.horizon_min,
                summary: s,
            });
        }
    }

    let table = CompareTable {
        config_sha256: manifest.config_sha256.clone(),
        rows,
    };
    let json_path = out.join("compare.json");
    write_json(&json_path, &table)?;
    manifest.add_output("compare_json", &json_path)?;

    let csv_rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            let s = &r.summary;
            vec![
                r.kind.name().to_string(),
                fmt_f64(r.horizon_min),
                s.status.clone(),
                opt_cell(s.val.as_ref().map(|m| m.rmse)),
                opt_cell(s.test.as_ref().map(|m| m.mape_percent)),
                opt_cell(s.test.as_ref().map(|m| m.rmse)),
            ]
        })
        .collect();
    let csv_path = out.join("compare.csv");
    write_table(
        &csv_path,
        &[
            "kind",
            "horizon_min",
            "status",
            "val_rmse",
            "test_mape_percent",
            "test_rmse",
        ],
        &csv_rows,
    )?;
    manifest.add_output("compare_csv", &csv_path)?;
    manifest.finish(out)?;

    for r in &table.rows {
        if let Some(t) = &r.summary.test {
            println!(
                "{:>16} {:>5} min: RMSE {} MAPE {}%",
                r.kind.name(),
                r.horizon_min,
                fmt_f64(t.rmse),
                fmt_f64(t.mape_percent)
            );
        }
    }
    let failed: Vec<String> = table
        .rows
        .iter()
        .filter(|r| r.summary.status != "ok")
        .map(|r| format!("{} at {} min", r.kind.name(), r.horizon_min))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "compare failed for {}",
            failed.join(", ")
        )))
    }
}

/// Rows of `frame` belonging to `split` under `cfg`'s fractions.
fn select_split(cfg: &RunConfig, frame: &SeriesFrame, split: SplitName) -> CliResult<SeriesFrame> {
    if split == SplitName::All {
        return Ok(frame.clone());
    }
    let splits = RawSplits::new(cfg, frame)?;
    Ok(splits.get(split).cloned().expect("named segment"))
}

fn load_checkpoint_series(ck_path: &Path, series: &Path) -> CliResult<(Checkpoint, SeriesFrame)> {
    let ck = Checkpoint::load(ck_path)?;
    let frame = read_series(series, ck.config.step_minutes)?;
    if frame.sensors() != ck.model.sensors() {
        return Err(CliError::Validation(format!(
            "series has {} sensors but the checkpoint expects {}",
            frame.sensors(),
            ck.model.sensors()
        )));
    }
    Ok((ck, frame))
}

/// Contents of `metrics.json` written by `eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    /// `checkpoint` or `oracle`.
    pub predictor: String,
    /// Segment that was scored.
    pub split: SplitName,
    /// Horizon in minutes (checkpoint mode).
    pub horizon_min: Option<f64>,
    /// Point metrics.
    pub metrics: SplitMetrics,
    /// Analytic RMSE floor (oracle mode).
    pub floor: Option<f64>,
    /// `rmse / floor` (oracle mode).
    pub rmse_over_floor: Option<f64>,
}

/// Contents of `synth.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthInfo {
    /// Generator configuration (including `phi_star`).
    pub config: SynthConfig,
    /// Analytic one-step RMSE floor.
    pub floor: f64,
    /// Spectral radius of `phi_star`.
    pub spectral_radius: SpectralEstimate,
}

fn cmd_eval(a: &EvalArgs) -> CliResult<()> {
    ensure_dir(&a.out)?;
    let (result, mut manifest) = if let Some(dir) = &a.oracle {
        let info_path = dir.join("synth.json");
        let info: SynthInfo = serde_json::from_slice(&read_bytes(&info_path)?)
            .map_err(|e| CliError::json(info_path.display().to_string(), e))?;
        let series = a.series.clone().unwrap_or_else(|| dir.join("series.csv"));
        let frame = read_series(&series, info.config.step_minutes)?;
        let seg = match a.split {
            SplitName::All => frame,
            s => {
                let cfg = RunConfig::resolve(&ConfigLayer::default(), frame.sensors())?;
                select_split(&cfg, &frame, s)?
            }
        };
        let (first, pred) = oracle_predictions_from_frame(&info.config, &seg)?;
        let truth = seg.values().slice_rows(first, seg.len());
        let metrics = split_metrics(&truth, &pred)?;
        let mut manifest = RunManifest::begin(
            "eval",
            &serde_json::json!({ "oracle": true, "split": a.split }),
            info.config.seed,
        )?;
        manifest.add_input("synth", &info_path)?;
        manifest.add_input("series", &series)?;
        let ratio = metrics.rmse / info.floor;
        (
            EvalMetrics {
                predictor: "oracle".into(),
                split: a.split,
                horizon_min: None,
                metrics,
                floor: Some(info.floor),
                rmse_over_floor: Some(ratio),
            },
            manifest,
        )
    } else {
        let ck_path = a
            .checkpoint
            .as_ref()
            .expect("clap requires checkpoint or oracle");
        let series = a
            .series
            .as_ref()
            .expect("clap requires series with a checkpoint");
        let (ck, frame) = load_checkpoint_series(ck_path, series)?;
        let seg = select_split(&ck.config, &frame, a.split)?;
        let (truth, pred) = predict_frame(&ck, &seg)?;
        let mut manifest = RunManifest::begin("eval", &ck.config, ck.config.seed)?;
        manifest.add_input("checkpoint", ck_path)?;
        manifest.add_input("series", series)?;
        (
            EvalMetrics {
                predictor: "checkpoint".into(),
                split: a.split,
                horizon_min: Some(ck.horizon_min),
                metrics: split_metrics(&truth, &pred)?,
                floor: None,
                rmse_over_floor: None,
            },
            manifest,
        )
    };
    let path = a.out.join("metrics.json");
    write_json(&path, &result)?;
    manifest.add_output("metrics", &path)?;
    manifest.finish(&a.out)?;
    println!(
        "RMSE {} MAPE {}%",
        fmt_f64(result.metrics.rmse),
        fmt_f64(result.metrics.mape_percent)
    );
    Ok(())
}

/// Contents of `diagnostics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Horizon in minutes.
    pub horizon_min: f64,
    /// Segment analyzed.
    pub split: SplitName,
    /// ECM, ACF and cross-lag covariances of the adjusted residuals.
    pub report: MetricsReport,
}

fn cmd_diagnose(a: &DiagnoseArgs) -> CliResult<()> {
    ensure_dir(&a.out)?;
    let (ck, frame) = load_checkpoint_series(&a.checkpoint, &a.series)?;
    let seg = select_split(&ck.config, &frame, a.split)?;
    let (truth, pred) = predict_frame(&ck, &seg)?;
    let report = metrics_report(&truth, &pred, a.max_lag, &a.crosslag.0, MAPE_THRESHOLD)?;
    let diag = Diagnostics {
        horizon_min: ck.horizon_min,
        split: a.split,
        report,
    };
    let mut manifest = RunManifest::begin("diagnose", &ck.config, ck.config.seed)?;
    manifest.add_input("checkpoint", &a.checkpoint)?;
    manifest.add_input("series", &a.series)?;
    let path = a.out.join("diagnostics.json");
    write_json(&path, &diag)?;
    manifest.add_output("diagnostics", &path)?;
    manifest.finish(&a.out)?;
    println!("offdiag energy {}", fmt_f64(diag.report.offdiag_energy));
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> CliResult<()> {
    let graph = match a.graph {
        GraphFamily::Path => GraphSpec::Path { n: a.sensors },
        GraphFamily::Ring => GraphSpec::Ring { n: a.sensors },
        GraphFamily::Er => GraphSpec::ErdosRenyi {
            n: a.sensors,
            p_edge: a.p_edge,
            seed: a.seed,
        },
    };
    let mut cfg = SynthConfig::new(graph, a.steps, a.taps.0.clone(), a.sigma, a.seed);
    cfg.phi_star = random_structural_phi(
        &cfg.graph.build(),
        a.radius,
        a.coupling,
        a.seed.wrapping_add(1),
    );
    cfg.level = a.level;
    cfg.quadratic = a.quadratic;
    cfg.step_minutes = a.step_min;
    let bundle = generate(&cfg)?;

    ensure_dir(&a.out)?;
    let mut manifest = RunManifest::begin("synth", &cfg, cfg.seed)?;
    let files = [
        ("series", "series.csv"),
        ("adjacency", "adjacency.csv"),
        ("phi_star", "phi_star.csv"),
        ("eta", "eta.csv"),
    ];
    write_series(&a.out.join(files[0].1), bundle.frame.values())?;
    write_matrix(&a.out.join(files[1].1), bundle.graph.adjacency())?;
    write_matrix(&a.out.join(files[2].1), &bundle.phi_star)?;
    write_matrix(&a.out.join(files[3].1), &bundle.eta)?;
    let info = SynthInfo {
        spectral_radius: power_iteration_radius(&bundle.phi_star),
        floor: bundle.floor,
        config: cfg,
    };
    write_json(&a.out.join("synth.json"), &info)?;
    for (role, name) in files
        .iter()
        .chain(std::iter::once(&("synth", "synth.json")))
    {
        manifest.add_output(role, &a.out.join(name))?;
    }
    manifest.finish(&a.out)?;
    println!(
        "wrote {} steps x {} sensors, floor {}",
        bundle.frame.len(),
        bundle.frame.sensors(),
        fmt_f64(info.floor)
    );
    Ok(())
}
