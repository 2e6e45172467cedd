//! Spatiotemporally autocorrelated error adjustment (SAEA) for one-step
//! forecasters.
//!
//! Residuals of a base forecaster are modeled as a vector autoregressive
//! process `eta_t = Phi eta_{t-1} + eps_t`. The coefficient matrix `Phi` is
//! learned jointly with the forecaster parameters by minimizing
//!
//! ```text
//! || G_t - Phi G_{t-1} - f(G_{t-1} - Phi G_{t-2}, ..., G_{t-H} - Phi Gbar; theta) ||^2 + alpha R
//! ```
//!
//! and applied at inference as `G*_t = Phi G_{t-1} + f(...)`. Six
//! parameterizations of `Phi` are available, including the graph-masked
//! structural one, see [`adjust::ErrorKind`].
//!
//! The crate is `no_std` (with `alloc`). File formats, checkpoints and the
//! command line live in the `saea` companion crate.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`graph`] | degree matrices, normalized Laplacians, structural masks |
//! | [`data`] | series frames, chronological splits, windows, z-score |
//! | [`forecaster`] | differentiable base models with closed-form VJPs |
//! | [`adjust`] | error models, regularizers, adjusted loss and inference |
//! | [`train`] | RMSProp / SGD joint training, direct and recursive multi-step |
//! | [`eval`] | MAPE, RMSE, ECM, ACF, cross-lag covariance |
//! | [`synth`] | synthetic data with known VAR errors, BFS mask oracle |
#![cfg_attr(not(test), no_std)]
#![warn(missing_docs)]

extern crate alloc;

pub mod adjust;
pub mod data;
mod error;
pub mod eval;
pub mod forecaster;
pub mod graph;
pub mod linalg;
pub(crate) mod math;
pub mod rng;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use linalg::Matrix;
