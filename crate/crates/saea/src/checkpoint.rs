//! Versioned JSON checkpoints of a trained `(model, error model)` pair.

use std::path::Path;

use saea_core::adjust::ErrorModel;
use saea_core::data::Normalizer;
use saea_core::forecaster::{AnyModel, Forecaster};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::format::to_json_string;
use crate::io::{read_bytes, sha256_hex, write_atomic};

/// Current checkpoint format version.
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to reproduce predictions for one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    /// Format version, checked on load.
    pub version: u32,
    /// Version of the toolkit that wrote the file.
    pub toolkit_version: String,
    /// Resolved run configuration.
    pub config: RunConfig,
    /// Horizon in minutes.
    pub horizon_min: f64,
    /// Zero-based horizon step.
    pub horizon_step: usize,
    /// Normalizer fitted on the training split.
    pub normalizer: Normalizer,
    /// Trained base forecaster.
    pub model: AnyModel,
    /// Trained error model (including its structural mask, if any).
    pub error_model: ErrorModel,
    /// SHA-256 of the JSON rendering of the mask matrix, if a mask is attached.
    pub mask_sha256: Option<String>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    /// Validation MSE of that epoch, in training units.
    pub best_val_mse: f64,
}

/// SHA-256 of an error model's mask, if it has one.
pub fn mask_hash(em: &ErrorModel) -> CliResult<Option<String>> {
    em.mask()
        .map(|m| Ok(sha256_hex(to_json_string(m.matrix())?.as_bytes())))
        .transpose()
}

impl Checkpoint {
    /// Write atomically as pretty JSON.
    pub fn save(&self, path: &Path) -> CliResult<()> {
        write_atomic(path, to_json_string(self)?.as_bytes())
    }

    /// Read, check the version and the internal consistency.
    pub fn load(path: &Path) -> CliResult<Self> {
        let bytes = read_bytes(path)?;
        let value: serde_json::Value = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::json(path.display().to_string(), e))?;
        match value.get("version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(CHECKPOINT_VERSION) => {}
            Some(v) => {
                return Err(CliError::Validation(format!(
                    "{}: checkpoint version {v} is not supported (expected {CHECKPOINT_VERSION})",
                    path.display()
                )))
            }
            None => {
                return Err(CliError::Validation(format!(
                    "{}: checkpoint has no version",
                    path.display()
                )))
            }
        }
        let ck: Checkpoint = serde_json::from_value(value)
            .map_err(|e| CliError::json(path.display().to_string(), e))?;
        ck.check()
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        Ok(ck)
    }

    fn check(&self) -> Result<(), String> {
        let em = &self.error_model;
        let n = self.model.sensors();
        if em.n() != n || self.normalizer.means.len() != n || self.normalizer.stds.len() != n {
            return Err(format!(
                "sensor counts disagree (model {n}, error model {})",
                em.n()
            ));
        }
        let fresh = ErrorModel::zeros(em.kind(), em.var_order(), em.n(), em.rank())
            .map_err(|e| e.to_string())?;
        if fresh.params().len() != em.params().len() {
            return Err(format!(
                "error model payload has {} entries, expected {}",
                em.params().len(),
                fresh.params().len()
            ));
        }
        if self.model.history() != self.config.history {
            return Err("model history disagrees with config".into());
        }
        let fresh_model = AnyModel::new(
            self.model.kind(),
            self.model.history(),
            n,
            None,
            self.config.hidden,
            0,
        );
        if let Ok(m) = fresh_model {
            if m.num_params() != self.model.num_params() {
                return Err("model parameter count is inconsistent".into());
            }
        }
        if mask_hash(em).map_err(|e| e.to_string())? != self.mask_sha256 {
            return Err("mask hash mismatch".into());
        }
        Ok(())
    }
}
