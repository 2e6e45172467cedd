//! End-to-end pipelines shared by the CLI and the tests: load data, split,
//! normalize, train one pair per horizon, and score predictions in
//! original units.

use std::path::Path;
use std::time::Instant;

use saea_core::adjust::{
    predict_windows, spectral_radius, ErrorKind, ErrorModel, SpectralEstimate,
};
use saea_core::data::{chronological_split, make_windows, Normalizer, SeriesFrame};
use saea_core::eval::{
    ecm, mape, median_acf_exceedance, offdiag_energy, rmse, Orientation, MAPE_THRESHOLD,
};
use saea_core::forecaster::AnyModel;
use saea_core::graph::{structural_mask, SensorGraph};
use saea_core::train::{fit_direct_multistep, Clock, TrainReport};
use saea_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{mask_hash, Checkpoint, CHECKPOINT_VERSION};
use crate::config::{KindChoice, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io::{read_matrix, read_series};

/// Wall clock measured from construction.
#[derive(Debug, Clone, Copy)]
pub struct SystemClock {
    start: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        Self {
            start: Instant::now(),
        }
    }
}

impl Clock for SystemClock {
    fn now_secs(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

/// Observations plus the optional sensor graph.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// Raw observations.
    pub frame: SeriesFrame,
    /// Sensor graph, if an adjacency file was given.
    pub graph: Option<SensorGraph>,
}

impl Dataset {
    /// Read a series CSV and an optional adjacency CSV.
    pub fn load(series: &Path, adjacency: Option<&Path>, step_minutes: f64) -> CliResult<Self> {
        let frame = read_series(series, step_minutes)?;
        let graph = adjacency
            .map(|p| -> CliResult<SensorGraph> { Ok(SensorGraph::new(read_matrix(p)?)?) })
            .transpose()?;
        if let Some(g) = &graph {
            if g.n() != frame.sensors() {
                return Err(CliError::Validation(format!(
                    "adjacency is {0}x{0} but the series has {1} sensors",
                    g.n(),
                    frame.sensors()
                )));
            }
        }
        Ok(Self { frame, graph })
    }
}

/// Which chronological segment to score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    /// Training segment.
    Train,
    /// Validation segment.
    Val,
    /// Held-out test segment.
    Test,
    /// The whole series.
    All,
}

/// Raw segments of a chronological split.
#[derive(Debug, Clone)]
pub struct RawSplits {
    /// Training rows.
    pub train: SeriesFrame,
    /// Validation rows.
    pub val: SeriesFrame,
    /// Test rows.
    pub test: SeriesFrame,
}

impl RawSplits {
    /// Split `frame` with the configured fractions.
    pub fn new(cfg: &RunConfig, frame: &SeriesFrame) -> CliResult<Self> {
        let (train, val, test) = chronological_split(frame, cfg.train_frac, cfg.val_frac)?;
        Ok(Self { train, val, test })
    }

    /// Segment by name (`All` is not a segment and returns `None`).
    pub fn get(&self, which: SplitName) -> Option<&SeriesFrame> {
        match which {
            SplitName::Train => Some(&self.train),
            SplitName::Val => Some(&self.val),
            SplitName::Test => Some(&self.test),
            SplitName::All => None,
        }
    }
}

/// Point metrics on one segment, in original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    /// Number of scored windows.
    pub windows: usize,
    /// MAPE in percent.
    pub mape_percent: f64,
    /// Entries excluded from MAPE (near-zero targets).
    pub mape_masked: usize,
    /// RMSE.
    pub rmse: f64,
    /// Off-diagonal energy of the spatial residual ECM.
    pub offdiag_energy: f64,
    /// Median over sensors of the ACF band-exceedance fraction at lags 1..=20.
    pub acf_exceedance: Option<f64>,
}

/// Lags inspected by the ACF summaries.
pub const ACF_MAX_LAG: usize = 20;

/// Score predictions against targets (both `B x N`, original units).
pub fn split_metrics(truth: &Matrix, pred: &Matrix) -> CliResult<SplitMetrics> {
    let m = mape(truth.as_slice(), pred.as_slice(), MAPE_THRESHOLD)?;
    let resid = truth.sub(pred)?;
    let acf = if resid.rows() > ACF_MAX_LAG {
        median_acf_exceedance(&resid, ACF_MAX_LAG).ok()
    } else {
        None
    };
    Ok(SplitMetrics {
        windows: truth.rows(),
        mape_percent: m.percent,
        mape_masked: m.masked,
        rmse: rmse(truth.as_slice(), pred.as_slice())?,
        offdiag_energy: offdiag_energy(&ecm(&resid, Orientation::Spatial)?)?,
        acf_exceedance: acf,
    })
}

/// Targets and adjusted predictions of a checkpoint on a raw frame, both in
/// original units. Windows never straddle the frame's boundaries.
pub fn predict_frame(ck: &Checkpoint, raw: &SeriesFrame) -> CliResult<(Matrix, Matrix)> {
    let h = ck.config.history;
    let norm = ck.normalizer.transform(raw);
    let ws = make_windows(&norm, h, ck.horizon_step)?;
    let pred = ck
        .normalizer
        .inverse_matrix(&predict_windows(&ck.model, &ck.error_model, &ws)?);
    let truth = make_windows(raw, h, ck.horizon_step)?.targets;
    Ok((truth, pred))
}

/// Build the untrained error model for a configuration.
pub fn initial_error_model(
    cfg: &RunConfig,
    n: usize,
    graph: Option<&SensorGraph>,
) -> CliResult<ErrorModel> {
    match cfg.kind {
        KindChoice::None => Ok(ErrorModel::zeros(
            ErrorKind::SparseFull,
            cfg.var_order,
            n,
            0,
        )?),
        KindChoice::Kind(k) => {
            let em = ErrorModel::new(k, cfg.var_order, n, cfg.regularizer.rank, cfg.seed)?;
            if k == ErrorKind::Structural {
                let g = graph.ok_or_else(|| {
                    CliError::Validation(
                        "the structural kind needs an adjacency matrix (--adjacency)".into(),
                    )
                })?;
                Ok(em.with_mask(structural_mask(g, cfg.mask_order)?)?)
            } else {
                Ok(em)
            }
        }
    }
}

/// Result of training one horizon.
#[derive(Debug, Clone)]
pub struct HorizonOutcome {
    /// Horizon in minutes.
    pub horizon_min: f64,
    /// Zero-based horizon step.
    pub horizon_step: usize,
    /// Checkpoint and training report, or the error message.
    pub result: Result<(Checkpoint, TrainReport), String>,
}

/// Train one `(model, error model)` pair per configured horizon.
pub fn train_horizons(
    cfg: &RunConfig,
    data: &Dataset,
    clock: &dyn Clock,
) -> CliResult<Vec<HorizonOutcome>> {
    let n = data.frame.sensors();
    let graph = data.graph.as_ref();
    let steps = cfg.horizon_steps()?;
    let splits = RawSplits::new(cfg, &data.frame)?;
    let normalizer = Normalizer::fit(&splits.train, cfg.normalize);
    let train = normalizer.transform(&splits.train);
    let val = normalizer.transform(&splits.val);
    // Fail on configuration problems once, before any horizon trains.
    initial_error_model(cfg, n, graph)?;
    AnyModel::new(cfg.model, cfg.history, n, graph, cfg.hidden, cfg.seed)?;

    let fits = fit_direct_multistep(
        |_| AnyModel::new(cfg.model, cfg.history, n, graph, cfg.hidden, cfg.seed),
        |_| initial_error_model(cfg, n, graph).map_err(|e| saea_core::Error::Config(e.to_string())),
        &cfg.train_config(0),
        &train,
        &val,
        &steps,
        clock,
    )?;
    fits.into_iter()
        .zip(&cfg.horizon_min)
        .map(|(f, &minutes)| {
            let result = match f.outcome {
                Ok((model, em, report)) => Ok((
                    Checkpoint {
                        version: CHECKPOINT_VERSION,
                        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
                        config: cfg.clone(),
                        horizon_min: minutes,
                        horizon_step: f.horizon_step,
                        normalizer: normalizer.clone(),
                        mask_sha256: mask_hash(&em)?,
                        model,
                        error_model: em,
                        best_epoch: report.best_epoch,
                        best_val_mse: report.best_val_mse,
                    },
                    report,
                )),
                Err(e) => Err(e.to_string()),
            };
            Ok(HorizonOutcome {
                horizon_min: minutes,
                horizon_step: f.horizon_step,
                result,
            })
        })
        .collect()
}

/// Deterministic per-horizon summary (no timings).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonSummary {
    /// Horizon in minutes.
    pub horizon_min: f64,
    /// Zero-based horizon step.
    pub horizon_step: usize,
    /// `ok` or `failed`.
    pub status: String,
    /// Error message for failed horizons.
    pub error: Option<String>,
    /// Epoch whose parameters were kept.
    pub best_epoch: Option<usize>,
    /// Validation MSE of that epoch (training units).
    pub best_val_mse: Option<f64>,
    /// Spectral radius of the trained error model's companion matrix.
    pub spectral_radius: Option<SpectralEstimate>,
    /// Validation metrics.
    pub val: Option<SplitMetrics>,
    /// Test metrics.
    pub test: Option<SplitMetrics>,
}

/// Score every trained horizon on the validation and test segments.
pub fn summarize(
    cfg: &RunConfig,
    data: &Dataset,
    outcomes: &[HorizonOutcome],
) -> CliResult<Vec<HorizonSummary>> {
    let splits = RawSplits::new(cfg, &data.frame)?;
    outcomes
        .iter()
        .map(|o| match &o.result {
            Ok((ck, report)) => {
                let (vt, vp) = predict_frame(ck, &splits.val)?;
                let (tt, tp) = predict_frame(ck, &splits.test)?;
                Ok(HorizonSummary {
                    horizon_min: o.horizon_min,
                    horizon_step: o.horizon_step,
                    status: "ok".into(),
                    error: None,
                    best_epoch: Some(report.best_epoch),
                    best_val_mse: Some(report.best_val_mse),
                    spectral_radius: Some(spectral_radius(&ck.error_model)?),
                    val: Some(split_metrics(&vt, &vp)?),
                    test: Some(split_metrics(&tt, &tp)?),
                })
            }
            Err(e) => Ok(HorizonSummary {
                horizon_min: o.horizon_min,
                horizon_step: o.horizon_step,
                status: "failed".into(),
                error: Some(e.clone()),
                best_epoch: None,
                best_val_mse: None,
                spectral_radius: None,
                val: None,
                test: None,
            }),
        })
        .collect()
}

/// One row of a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    /// Error-model kind (`none` is the frozen baseline).
    pub kind: KindChoice,
    /// Horizon in minutes.
    pub horizon_min: f64,
    /// Summary for this kind and horizon.
    pub summary: HorizonSummary,
}
