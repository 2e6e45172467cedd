//! File formats, checkpoints, run manifests, experiment pipelines and the
//! command-line front end for `saea-core`.
//!
//! Every number written by this crate uses 17 significant digits so that
//! runs can be diffed and re-read bit-exactly.

#![warn(missing_docs)]

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod format;
pub mod io;
pub mod manifest;

pub use error::{CliError, CliResult};
