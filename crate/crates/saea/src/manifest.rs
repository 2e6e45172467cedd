//! Per-run manifest: command, resolved config, seed, and hashes of every
//! input and output file.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::format::to_json_string;
use crate::io::{sha256_file, sha256_hex, write_atomic};

/// File name of the manifest inside a run directory.
pub const MANIFEST_FILE: &str = "manifest.json";

/// A file consumed or produced by a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    /// What the file is (e.g. `series`, `checkpoint`).
    pub role: String,
    /// Path as given on the command line or written by the run.
    pub path: String,
    /// Lowercase hex SHA-256 of the contents.
    pub sha256: String,
}

/// Record of one CLI invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Subcommand name.
    pub command: String,
    /// Toolkit version.
    pub toolkit_version: String,
    /// Seed driving every random draw of the run.
    pub seed: u64,
    /// Fully resolved configuration.
    pub config: serde_json::Value,
    /// SHA-256 of the canonical JSON rendering of `config`.
    pub config_sha256: String,
    /// Input files.
    pub inputs: Vec<FileRecord>,
    /// Output files (the manifest itself excluded).
    pub outputs: Vec<FileRecord>,
    /// Start time, seconds since the Unix epoch.
    pub started_unix_secs: u64,
    /// End time, seconds since the Unix epoch.
    pub finished_unix_secs: u64,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    /// Start a manifest for `command` with a resolved configuration.
    pub fn begin<C: Serialize>(command: &str, config: &C, seed: u64) -> CliResult<Self> {
        let rendered = to_json_string(config)?;
        let value =
            serde_json::from_str(&rendered).map_err(|e| CliError::json("manifest config", e))?;
        Ok(Self {
            command: command.to_string(),
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config: value,
            config_sha256: sha256_hex(rendered.as_bytes()),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_unix_secs: unix_now(),
            finished_unix_secs: 0,
        })
    }

    /// Record and hash an input file.
    pub fn add_input(&mut self, role: &str, path: &Path) -> CliResult<()> {
        self.inputs.push(FileRecord {
            role: role.into(),
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    /// Record and hash an output file.
    pub fn add_output(&mut self, role: &str, path: &Path) -> CliResult<()> {
        self.outputs.push(FileRecord {
            role: role.into(),
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    /// Stamp the finish time and write `manifest.json` into `dir`.
    pub fn finish(mut self, dir: &Path) -> CliResult<()> {
        self.finished_unix_secs = unix_now();
        write_atomic(&dir.join(MANIFEST_FILE), to_json_string(&self)?.as_bytes())
    }

    /// Read a manifest back.
    pub fn load(path: &Path) -> CliResult<Self> {
        let bytes = crate::io::read_bytes(path)?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::json(path.display().to_string(), e))
    }
}
