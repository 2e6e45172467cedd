//! Joint minibatch optimization of forecaster parameters and error-model
//! payload.
//!
//! The forecaster parameters `theta` and the error-model payload are treated
//! as one concatenated vector with one optimizer state and one learning
//! rate. Training runs a fixed epoch budget; the parameters with the lowest
//! validation MSE are restored at the end unless [`Selection::LastEpoch`]
//! is requested. Both numbers are kept in the [`TrainReport`].

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::adjust::{
    predict_windows, saea_loss_on, saea_predict, spectral_radius, ErrorModel, RegularizerConfig,
    SpectralEstimate,
};
use crate::data::{make_windows, shift_with_mean, SeriesFrame, WindowSet};
use crate::error::{shape_err, Error, Result};
use crate::forecaster::Forecaster;
use crate::linalg::{norm2, Matrix};
use crate::math;
use crate::rng::SeededRng;

/// RMSProp decay.
pub const RMSPROP_RHO: f64 = 0.9;
/// RMSProp stabilizer (added inside the square root).
pub const RMSPROP_EPS: f64 = 1e-8;

/// Optimizer choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    /// RMSProp with `rho = 0.9`, `eps = 1e-8`.
    #[default]
    Rmsprop,
    /// Plain gradient descent.
    Sgd,
}

/// Which parameters `fit` leaves in the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Parameters of the epoch with the lowest validation MSE.
    #[default]
    BestValidation,
    /// Parameters after the final epoch.
    LastEpoch,
}

/// Training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Number of passes over the training windows.
    pub epochs: usize,
    /// Step size.
    pub learning_rate: f64,
    /// Windows per step.
    pub batch_size: usize,
    /// Update rule.
    pub optimizer: OptimizerKind,
    /// Penalty settings for the error model.
    pub regularizer: RegularizerConfig,
    /// History length `H`.
    pub history: usize,
    /// Zero-based horizon step `p`.
    pub horizon_step: usize,
    /// VAR order of the error model.
    pub var_order: usize,
    /// Seed for shuffling.
    pub seed: u64,
    /// Reshuffle the training windows every epoch.
    pub shuffle: bool,
    /// Optional cap on the global gradient norm.
    pub grad_clip: Option<f64>,
    /// Keep the error model fixed (baseline training with `Phi = 0`).
    pub freeze_error_model: bool,
    /// Which parameters to keep.
    pub selection: Selection,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            learning_rate: 5e-4,
            batch_size: 50,
            optimizer: OptimizerKind::Rmsprop,
            regularizer: RegularizerConfig::none(),
            history: 12,
            horizon_step: 0,
            var_order: 1,
            seed: 0,
            shuffle: true,
            grad_clip: None,
            freeze_error_model: false,
            selection: Selection::BestValidation,
        }
    }
}

impl TrainConfig {
    /// Check the invariants `epochs >= 1`, `batch_size >= 1`, `learning_rate > 0`.
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(alloc::format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if let Some(c) = self.grad_clip {
            if c.is_nan() || c <= 0.0 {
                return Err(Error::Config(alloc::format!(
                    "grad_clip must be > 0, got {c}"
                )));
            }
        }
        if !(1..=2).contains(&self.var_order) {
            return Err(Error::Config(alloc::format!(
                "var_order must be 1 or 2, got {}",
                self.var_order
            )));
        }
        Ok(())
    }
}

/// Running mean of squared gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsPropState {
    /// Decay `rho`.
    pub rho: f64,
    /// Stabilizer `eps`.
    pub eps: f64,
    /// Per-parameter second-moment estimate.
    pub sq: Vec<f64>,
}

impl RmsPropState {
    /// Fresh zero state for `len` parameters.
    pub fn new(len: usize) -> Self {
        Self {
            rho: RMSPROP_RHO,
            eps: RMSPROP_EPS,
            sq: vec![0.0; len],
        }
    }
}

/// One RMSProp update:
/// `s <- rho s + (1 - rho) g^2`, `x <- x - lr g / sqrt(s + eps)`.
pub fn rmsprop_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut RmsPropState,
    lr: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.sq.len() {
        return Err(shape_err(
            "rmsprop_step",
            (params.len(), 1),
            (grads.len(), state.sq.len()),
        ));
    }
    let (rho, eps) = (state.rho, state.eps);
    for ((x, &g), s) in params.iter_mut().zip(grads).zip(state.sq.iter_mut()) {
        *s = rho * *s + (1.0 - rho) * g * g;
        *x -= lr * g / math::sqrt(*s + eps);
    }
    Ok(())
}

/// Source of wall-clock time for the per-epoch report.
pub trait Clock {
    /// Seconds since an arbitrary fixed origin.
    fn now_secs(&self) -> f64;
}

/// Clock that always reads zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_secs(&self) -> f64 {
        0.0
    }
}

/// Per-epoch statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// Zero-based epoch.
    pub epoch: usize,
    /// Mean training loss over the epoch's steps, weighted by batch size.
    pub train_loss: f64,
    /// Validation MSE (training units) after the epoch.
    pub val_mse: f64,
    /// Spectral radius of the error model's companion matrix.
    pub spectral_radius: SpectralEstimate,
    /// Seconds elapsed since the start of `fit`.
    pub wall_clock_secs: f64,
}

/// Summary of one `fit` call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// One record per completed epoch.
    pub epochs: Vec<EpochRecord>,
    /// Epoch with the lowest validation MSE.
    pub best_epoch: usize,
    /// Lowest validation MSE.
    pub best_val_mse: f64,
    /// Validation MSE after the final epoch.
    pub last_val_mse: f64,
    /// Which parameters were left in the model.
    pub selection: Selection,
    /// Total optimizer steps.
    pub steps: usize,
}

struct Snapshot {
    theta: Vec<f64>,
    payload: Vec<f64>,
}

impl Snapshot {
    fn take<F: Forecaster + ?Sized>(model: &F, em: &ErrorModel) -> Self {
        Self {
            theta: model.params().to_vec(),
            payload: em.params().to_vec(),
        }
    }

    fn restore<F: Forecaster + ?Sized>(&self, model: &mut F, em: &mut ErrorModel) {
        model.params_mut().copy_from_slice(&self.theta);
        em.params_mut().copy_from_slice(&self.payload);
    }
}

fn mse(a: &Matrix, b: &Matrix) -> f64 {
    let n = a.as_slice().len().max(1) as f64;
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n
}

/// Validation MSE of the adjusted predictor.
pub fn validation_mse<F: Forecaster + ?Sized>(
    model: &F,
    em: &ErrorModel,
    val: &WindowSet,
) -> Result<f64> {
    Ok(mse(&predict_windows(model, em, val)?, &val.targets))
}

/// Train `model` and `em` jointly on `train`, selecting on `val`.
///
/// On a non-finite loss or gradient the parameters are rolled back to the
/// last good checkpoint and [`Error::Diverged`] carries the partial report.
pub fn fit<F: Forecaster + ?Sized>(
    model: &mut F,
    em: &mut ErrorModel,
    cfg: &TrainConfig,
    train: &WindowSet,
    val: &WindowSet,
    clock: &dyn Clock,
) -> Result<TrainReport> {
    cfg.validate()?;
    cfg.regularizer.validate(em.kind(), em.n())?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Validation(
            "train and validation windows must be nonempty".into(),
        ));
    }
    if train.history() != cfg.history || model.history() != cfg.history {
        return Err(Error::Config(alloc::format!(
            "history mismatch: config {}, model {}, windows {}",
            cfg.history,
            model.history(),
            train.history()
        )));
    }
    if train.horizon_step != cfg.horizon_step || val.horizon_step != cfg.horizon_step {
        return Err(Error::Config(
            "windows were built for a different horizon step".into(),
        ));
    }
    if em.var_order() != cfg.var_order {
        return Err(Error::Config(alloc::format!(
            "error model has VAR order {}, config says {}",
            em.var_order(),
            cfg.var_order
        )));
    }

    let start = clock.now_secs();
    let n_theta = model.num_params();
    let n_payload = if cfg.freeze_error_model {
        0
    } else {
        em.params().len()
    };
    let mut state = RmsPropState::new(n_theta + n_payload);
    let mut flat = vec![0.0; n_theta + n_payload];
    let mut grads = vec![0.0; n_theta + n_payload];
    let mut rng = SeededRng::new(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut best = Snapshot::take(model, em);
    let mut report = TrainReport {
        epochs: Vec::with_capacity(cfg.epochs),
        best_epoch: 0,
        best_val_mse: f64::INFINITY,
        last_val_mse: f64::NAN,
        selection: cfg.selection,
        steps: 0,
    };

    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            rng.shuffle(&mut order);
        }
        let mut loss_sum = 0.0;
        for (step, batch) in order.chunks(cfg.batch_size).enumerate() {
            let eval = saea_loss_on(model, em, &cfg.regularizer, train, batch)?;
            let finite = eval.loss.is_finite()
                && eval.grad_theta.iter().all(|g| g.is_finite())
                && (cfg.freeze_error_model || eval.grad_payload.iter().all(|g| g.is_finite()));
            if !finite {
                best.restore(model, em);
                return Err(Error::Diverged {
                    epoch,
                    step,
                    report: alloc::boxed::Box::new(report),
                });
            }
            loss_sum += eval.loss * batch.len() as f64;

            grads[..n_theta].copy_from_slice(&eval.grad_theta);
            if n_payload > 0 {
                grads[n_theta..].copy_from_slice(&eval.grad_payload);
            }
            if let Some(clip) = cfg.grad_clip {
                let g = norm2(&grads);
                if g > clip {
                    grads.iter_mut().for_each(|v| *v *= clip / g);
                }
            }
            flat[..n_theta].copy_from_slice(model.params());
            if n_payload > 0 {
                flat[n_theta..].copy_from_slice(em.params());
            }
            match cfg.optimizer {
                OptimizerKind::Rmsprop => {
                    rmsprop_step(&mut flat, &grads, &mut state, cfg.learning_rate)?
                }
                OptimizerKind::Sgd => {
                    for (x, g) in flat.iter_mut().zip(&grads) {
                        *x -= cfg.learning_rate * g;
                    }
                }
            }
            model.params_mut().copy_from_slice(&flat[..n_theta]);
            if n_payload > 0 {
                em.params_mut().copy_from_slice(&flat[n_theta..]);
            }
            report.steps += 1;
        }

        let val_mse = validation_mse(model, em, val)?;
        if !val_mse.is_finite() {
            best.restore(model, em);
            return Err(Error::Diverged {
                epoch,
                step: report.steps,
                report: alloc::boxed::Box::new(report),
            });
        }
        if val_mse < report.best_val_mse {
            report.best_val_mse = val_mse;
            report.best_epoch = epoch;
            best = Snapshot::take(model, em);
        }
        report.last_val_mse = val_mse;
        report.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_mse,
            spectral_radius: spectral_radius(em)?,
            wall_clock_secs: clock.now_secs() - start,
        });
    }

    if cfg.selection == Selection::BestValidation {
        best.restore(model, em);
    }
    Ok(report)
}

/// Outcome of training one horizon in [`fit_direct_multistep`].
#[derive(Debug)]
pub struct HorizonFit<F> {
    /// Zero-based horizon step.
    pub horizon_step: usize,
    /// Trained pair and report, or the error for this horizon.
    pub outcome: Result<(F, ErrorModel, TrainReport)>,
}

/// One independently trained `(model, error model)` pair per horizon step.
///
/// Failures are reported per horizon; the remaining horizons still run.
pub fn fit_direct_multistep<F, MF, EF>(
    mut model_factory: MF,
    mut em_factory: EF,
    cfg: &TrainConfig,
    train: &SeriesFrame,
    val: &SeriesFrame,
    horizons: &[usize],
    clock: &dyn Clock,
) -> Result<Vec<HorizonFit<F>>>
where
    F: Forecaster,
    MF: FnMut(usize) -> Result<F>,
    EF: FnMut(usize) -> Result<ErrorModel>,
{
    if horizons.is_empty() {
        return Err(Error::Validation("no horizons requested".into()));
    }
    let mut out = Vec::with_capacity(horizons.len());
    for &p in horizons {
        let outcome = (|| {
            let cfg_p = TrainConfig {
                horizon_step: p,
                ..cfg.clone()
            };
            let tw = make_windows(train, cfg.history, p)?;
            let vw = make_windows(val, cfg.history, p)?;
            let mut model = model_factory(p)?;
            let mut em = em_factory(p)?;
            let report = fit(&mut model, &mut em, &cfg_p, &tw, &vw, clock)?;
            Ok((model, em, report))
        })();
        out.push(HorizonFit {
            horizon_step: p,
            outcome,
        });
    }
    Ok(out)
}

/// Roll a one-step adjusted model forward `steps` times from `window`
/// (`H x N`, newest lag first). Each prediction becomes the newest lag and
/// the shifted windows, including their mean pad, are rebuilt from the
/// rolled buffer.
pub fn predict_recursive<F: Forecaster + ?Sized>(
    model: &F,
    em: &ErrorModel,
    window: &Matrix,
    steps: usize,
) -> Result<Matrix> {
    model.check_window(window)?;
    let (h, n) = window.shape();
    let mut buffer = window.clone();
    let mut out = Matrix::zeros(steps, n);
    for s in 0..steps {
        let s1 = shift_with_mean(&buffer, 1);
        let s2 = shift_with_mean(&buffer, 2);
        let pred = saea_predict(model, em, &buffer, &[&s1, &s2])?;
        out.row_mut(s).copy_from_slice(&pred);
        let mut next = Matrix::zeros(h, n);
        next.row_mut(0).copy_from_slice(&pred);
        for r in 1..h {
            next.row_mut(r).copy_from_slice(buffer.row(r - 1));
        }
        buffer = next;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmsprop_hand_example() {
        let mut x = [1.0];
        let mut st = RmsPropState::new(1);
        rmsprop_step(&mut x, &[1.0], &mut st, 0.1).unwrap();
        assert!((st.sq[0] - 0.1).abs() < 1e-15);
        let expected = 1.0 - 0.1 / (0.1f64 + 1e-8).sqrt();
        assert!((x[0] - expected).abs() < 1e-15);
        assert!((x[0] - 0.6838).abs() < 1e-4);
    }

    #[test]
    fn rmsprop_zero_grad_is_noop() {
        let mut x = [0.3, -2.0];
        let mut st = RmsPropState::new(2);
        rmsprop_step(&mut x, &[0.0, 0.0], &mut st, 0.5).unwrap();
        assert_eq!(x, [0.3, -2.0]);
    }

    #[test]
    fn rmsprop_is_deterministic() {
        let mut a = ([0.5, 1.5], RmsPropState::new(2));
        let mut b = a.clone();
        rmsprop_step(&mut a.0, &[0.2, -0.7], &mut a.1, 0.01).unwrap();
        rmsprop_step(&mut b.0, &[0.2, -0.7], &mut b.1, 0.01).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_invariants() {
        let mut c = TrainConfig::default();
        assert!(c.validate().is_ok());
        c.epochs = 0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
        let c = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
