//! Run configuration: `key = value` files, CLI overrides and resolution
//! against built-in defaults.
//!
//! Precedence is CLI flag, then config file, then built-in default. The
//! per-kind defaults for `alpha`, `beta` and `rank` come from
//! [`RegularizerConfig::defaults_for`].

use std::fmt;
use std::str::FromStr;

use saea_core::adjust::{ErrorKind, RegularizerConfig};
use saea_core::data::{horizon_step_for, NormalizeMode};
use saea_core::forecaster::{ModelKind, DEFAULT_HIDDEN};
use saea_core::train::{OptimizerKind, Selection, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::format::to_json_string;
use crate::io::sha256_hex;

/// Error-model choice, including the frozen-at-zero baseline `none`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum KindChoice {
    /// Baseline: `Phi` frozen at zero.
    None,
    /// One of the six parameterizations.
    Kind(ErrorKind),
}

impl KindChoice {
    /// All choices in table order: `none` followed by the six kinds.
    pub fn all() -> Vec<KindChoice> {
        std::iter::once(KindChoice::None)
            .chain(ErrorKind::ALL.iter().map(|&k| KindChoice::Kind(k)))
            .collect()
    }

    /// Canonical name.
    pub fn name(self) -> &'static str {
        match self {
            KindChoice::None => "none",
            KindChoice::Kind(k) => k.name(),
        }
    }
}

impl fmt::Display for KindChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl From<KindChoice> for String {
    fn from(k: KindChoice) -> String {
        k.name().to_string()
    }
}

impl TryFrom<String> for KindChoice {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl FromStr for KindChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "none" {
            return Ok(KindChoice::None);
        }
        ErrorKind::parse(s).map(KindChoice::Kind).map_err(|_| {
            let names: Vec<&str> = KindChoice::all().iter().map(|k| k.name()).collect();
            format!("unknown kind {s:?} (expected one of {})", names.join(", "))
        })
    }
}

/// Parse a model name.
pub fn parse_model(s: &str) -> Result<ModelKind, String> {
    ModelKind::parse(s)
        .map_err(|_| format!("unknown model {s:?} (expected node_ar, graph_filter_ar or mlp)"))
}

/// Parse an optimizer name.
pub fn parse_optimizer(s: &str) -> Result<OptimizerKind, String> {
    match s {
        "rmsprop" => Ok(OptimizerKind::Rmsprop),
        "sgd" => Ok(OptimizerKind::Sgd),
        _ => Err(format!("unknown optimizer {s:?} (expected rmsprop or sgd)")),
    }
}

/// Parse a selection rule.
pub fn parse_selection(s: &str) -> Result<Selection, String> {
    match s {
        "best_validation" => Ok(Selection::BestValidation),
        "last_epoch" => Ok(Selection::LastEpoch),
        _ => Err(format!(
            "unknown selection {s:?} (expected best_validation or last_epoch)"
        )),
    }
}

/// Parse a normalization mode.
pub fn parse_normalize(s: &str) -> Result<NormalizeMode, String> {
    match s {
        "none" => Ok(NormalizeMode::None),
        "zscore" => Ok(NormalizeMode::Zscore),
        _ => Err(format!(
            "unknown normalization {s:?} (expected none or zscore)"
        )),
    }
}

/// Parse a boolean (`true/false`, `yes/no`, `1/0`).
pub fn parse_bool(s: &str) -> Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected a boolean, found {s:?}")),
    }
}

/// Parse a comma-separated list of horizons in minutes.
pub fn parse_minutes_list(s: &str) -> Result<Vec<f64>, String> {
    let v = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad horizon {p:?}"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if v.is_empty() {
        return Err("empty horizon list".into());
    }
    Ok(v)
}

/// Parse an optional positive real where `none` means unset.
pub fn parse_opt_f64(s: &str) -> Result<Option<f64>, String> {
    if s == "none" {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| format!("expected a number or none, found {s:?}"))
}

fn parse_num<T: FromStr>(s: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("cannot parse {s:?}"))
}

/// One layer of optional settings (from the CLI or from a file).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigLayer {
    /// Base forecaster.
    pub model: Option<ModelKind>,
    /// Hidden width for the MLP.
    pub hidden: Option<usize>,
    /// Error-model kind.
    pub kind: Option<KindChoice>,
    /// Penalty coefficient.
    pub alpha: Option<f64>,
    /// Sparse weight for `low_rank_sparse`.
    pub beta: Option<f64>,
    /// Rank for the low-rank kinds.
    pub rank: Option<usize>,
    /// Squared structural penalty.
    pub squared_structural_penalty: Option<bool>,
    /// Hop order of the structural mask.
    pub mask_order: Option<usize>,
    /// VAR order of the error model.
    pub var_order: Option<usize>,
    /// History length `H`.
    pub history: Option<usize>,
    /// Horizons in minutes.
    pub horizon_min: Option<Vec<f64>>,
    /// Sampling interval in minutes.
    pub step_minutes: Option<f64>,
    /// Training epochs.
    pub epochs: Option<usize>,
    /// Learning rate.
    pub learning_rate: Option<f64>,
    /// Batch size.
    pub batch_size: Option<usize>,
    /// Optimizer.
    pub optimizer: Option<OptimizerKind>,
    /// Seed.
    pub seed: Option<u64>,
    /// Reshuffle every epoch.
    pub shuffle: Option<bool>,
    /// Gradient clipping; `Some(None)` explicitly disables it.
    pub grad_clip: Option<Option<f64>>,
    /// Parameter selection rule.
    pub selection: Option<Selection>,
    /// Normalization.
    pub normalize: Option<NormalizeMode>,
    /// Training fraction of the chronological split.
    pub train_frac: Option<f64>,
    /// Validation fraction of the chronological split.
    pub val_frac: Option<f64>,
}

/// Recognized keys, canonical name first, then aliases.
pub const KEYS: &[&[&str]] = &[
    &["model"],
    &["hidden"],
    &["kind"],
    &["alpha"],
    &["beta"],
    &["rank", "k"],
    &["squared_structural_penalty"],
    &["mask_order"],
    &["var_order", "p_var"],
    &["history", "h"],
    &["horizon_min", "horizons"],
    &["step_minutes", "step_min"],
    &["epochs"],
    &["learning_rate", "lr"],
    &["batch_size", "batch"],
    &["optimizer"],
    &["seed"],
    &["shuffle"],
    &["grad_clip"],
    &["selection"],
    &["normalize"],
    &["train_frac"],
    &["val_frac"],
];

fn canonical(key: &str) -> Option<&'static str> {
    KEYS.iter()
        .find(|names| names.contains(&key))
        .map(|names| names[0])
}

impl ConfigLayer {
    /// Set one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let Some(key) = canonical(key) else {
            return Err(format!("unknown key {key:?}"));
        };
        let v = value.trim();
        match key {
            "model" => self.model = Some(parse_model(v)?),
            "hidden" => self.hidden = Some(parse_num(v)?),
            "kind" => self.kind = Some(v.parse()?),
            "alpha" => self.alpha = Some(parse_num(v)?),
            "beta" => self.beta = Some(parse_num(v)?),
            "rank" => self.rank = Some(parse_num(v)?),
            "squared_structural_penalty" => self.squared_structural_penalty = Some(parse_bool(v)?),
            "mask_order" => self.mask_order = Some(parse_num(v)?),
            "var_order" => self.var_order = Some(parse_num(v)?),
            "history" => self.history = Some(parse_num(v)?),
            "horizon_min" => self.horizon_min = Some(parse_minutes_list(v)?),
            "step_minutes" => self.step_minutes = Some(parse_num(v)?),
            "epochs" => self.epochs = Some(parse_num(v)?),
            "learning_rate" => self.learning_rate = Some(parse_num(v)?),
            "batch_size" => self.batch_size = Some(parse_num(v)?),
            "optimizer" => self.optimizer = Some(parse_optimizer(v)?),
            "seed" => self.seed = Some(parse_num(v)?),
            "shuffle" => self.shuffle = Some(parse_bool(v)?),
            "grad_clip" => self.grad_clip = Some(parse_opt_f64(v)?),
            "selection" => self.selection = Some(parse_selection(v)?),
            "normalize" => self.normalize = Some(parse_normalize(v)?),
            "train_frac" => self.train_frac = Some(parse_num(v)?),
            "val_frac" => self.val_frac = Some(parse_num(v)?),
            _ => unreachable!("every canonical key is handled"),
        }
        Ok(())
    }

    /// Parse `key = value` lines. Blank lines and `#` comments are ignored.
    pub fn parse_str(text: &str) -> CliResult<Self> {
        let mut layer = ConfigLayer::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Validation(format!("config line {}: expected key = value", i + 1))
            })?;
            layer
                .set(k.trim(), v)
                .map_err(|e| CliError::Validation(format!("config line {}: {e}", i + 1)))?;
        }
        Ok(layer)
    }

    /// Fill every unset field of `self` from `lower`.
    pub fn overlay(self, lower: ConfigLayer) -> ConfigLayer {
        ConfigLayer {
            model: self.model.or(lower.model),
            hidden: self.hidden.or(lower.hidden),
            kind: self.kind.or(lower.kind),
            alpha: self.alpha.or(lower.alpha),
            beta: self.beta.or(lower.beta),
            rank: self.rank.or(lower.rank),
            squared_structural_penalty: self
                .squared_structural_penalty
                .or(lower.squared_structural_penalty),
            mask_order: self.mask_order.or(lower.mask_order),
            var_order: self.var_order.or(lower.var_order),
            history: self.history.or(lower.history),
            horizon_min: self.horizon_min.or(lower.horizon_min),
            step_minutes: self.step_minutes.or(lower.step_minutes),
            epochs: self.epochs.or(lower.epochs),
            learning_rate: self.learning_rate.or(lower.learning_rate),
            batch_size: self.batch_size.or(lower.batch_size),
            optimizer: self.optimizer.or(lower.optimizer),
            seed: self.seed.or(lower.seed),
            shuffle: self.shuffle.or(lower.shuffle),
            grad_clip: self.grad_clip.or(lower.grad_clip),
            selection: self.selection.or(lower.selection),
            normalize: self.normalize.or(lower.normalize),
            train_frac: self.train_frac.or(lower.train_frac),
            val_frac: self.val_frac.or(lower.val_frac),
        }
    }
}

/// Default horizons in minutes.
pub const DEFAULT_HORIZONS_MIN: [f64; 3] = [15.0, 30.0, 45.0];

/// Fully resolved settings for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Base forecaster.
    pub model: ModelKind,
    /// Hidden width for the MLP.
    pub hidden: usize,
    /// Error-model kind.
    pub kind: KindChoice,
    /// Penalty settings (all zero for `none`).
    pub regularizer: RegularizerConfig,
    /// Hop order of the structural mask.
    pub mask_order: usize,
    /// VAR order of the error model.
    pub var_order: usize,
    /// History length `H`.
    pub history: usize,
    /// Horizons in minutes.
    pub horizon_min: Vec<f64>,
    /// Sampling interval in minutes.
    pub step_minutes: f64,
    /// Training epochs.
    pub epochs: usize,
    /// Learning rate.
    pub learning_rate: f64,
    /// Batch size.
    pub batch_size: usize,
    /// Optimizer.
    pub optimizer: OptimizerKind,
    /// Seed for initialization and shuffling.
    pub seed: u64,
    /// Reshuffle every epoch.
    pub shuffle: bool,
    /// Gradient clipping.
    pub grad_clip: Option<f64>,
    /// Parameter selection rule.
    pub selection: Selection,
    /// Normalization.
    pub normalize: NormalizeMode,
    /// Training fraction.
    pub train_frac: f64,
    /// Validation fraction.
    pub val_frac: f64,
}

impl RunConfig {
    /// Resolve a merged layer for `n` sensors, applying defaults and checks.
    pub fn resolve(layer: &ConfigLayer, n: usize) -> CliResult<Self> {
        let kind = layer
            .kind
            .unwrap_or(KindChoice::Kind(ErrorKind::Structural));
        let regularizer = match kind {
            KindChoice::None => RegularizerConfig::none(),
            KindChoice::Kind(k) => {
                let d = RegularizerConfig::defaults_for(k, n);
                let r = RegularizerConfig {
                    alpha: layer.alpha.unwrap_or(d.alpha),
                    beta: layer.beta.unwrap_or(d.beta),
                    rank: if k.is_low_rank() {
                        layer.rank.unwrap_or(d.rank)
                    } else {
                        0
                    },
                    squared_structural_penalty: layer.squared_structural_penalty.unwrap_or(false),
                };
                r.validate(k, n)?;
                r
            }
        };
        let cfg = RunConfig {
            model: layer.model.unwrap_or(ModelKind::GraphFilterAr),
            hidden: layer.hidden.unwrap_or(DEFAULT_HIDDEN),
            kind,
            regularizer,
            mask_order: layer.mask_order.unwrap_or(1),
            var_order: layer.var_order.unwrap_or(1),
            history: layer.history.unwrap_or(12),
            horizon_min: layer
                .horizon_min
                .clone()
                .unwrap_or_else(|| DEFAULT_HORIZONS_MIN.to_vec()),
            step_minutes: layer.step_minutes.unwrap_or(5.0),
            epochs: layer.epochs.unwrap_or(300),
            learning_rate: layer.learning_rate.unwrap_or(5e-4),
            batch_size: layer.batch_size.unwrap_or(50),
            optimizer: layer.optimizer.unwrap_or_default(),
            seed: layer.seed.unwrap_or(0),
            shuffle: layer.shuffle.unwrap_or(true),
            grad_clip: layer.grad_clip.unwrap_or(None),
            selection: layer.selection.unwrap_or_default(),
            normalize: layer.normalize.unwrap_or_default(),
            train_frac: layer.train_frac.unwrap_or(0.7),
            val_frac: layer.val_frac.unwrap_or(0.1),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        if self.history < 1 {
            return Err(CliError::Validation("history must be at least 1".into()));
        }
        if !(1..=2).contains(&self.mask_order) {
            return Err(CliError::Validation(format!(
                "mask_order must be 1 or 2, got {}",
                self.mask_order
            )));
        }
        if self.model == ModelKind::Mlp && self.hidden == 0 {
            return Err(CliError::Validation("hidden must be at least 1".into()));
        }
        self.horizon_steps()?;
        self.train_config(0).validate()?;
        Ok(())
    }

    /// Zero-based horizon steps for the configured minutes.
    pub fn horizon_steps(&self) -> CliResult<Vec<usize>> {
        Ok(self
            .horizon_min
            .iter()
            .map(|&m| horizon_step_for(m, self.step_minutes))
            .collect::<Result<Vec<_>, _>>()?)
    }

    /// Core training settings for one horizon step.
    pub fn train_config(&self, horizon_step: usize) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            optimizer: self.optimizer,
            regularizer: self.regularizer,
            history: self.history,
            horizon_step,
            var_order: self.var_order,
            seed: self.seed,
            shuffle: self.shuffle,
            grad_clip: self.grad_clip,
            freeze_error_model: self.kind == KindChoice::None,
            selection: self.selection,
        }
    }

    /// SHA-256 of the canonical JSON rendering.
    pub fn sha256(&self) -> CliResult<String> {
        Ok(sha256_hex(to_json_string(self)?.as_bytes()))
    }
}
