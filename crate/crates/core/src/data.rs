//! Observation frames, chronological splits, z-score normalization and the
//! supervised windows used for direct multi-step training.
//!
//! Lag ordering: slot 0 of every window is the most recent observation
//! `G_{t-1}`, slot `H-1` is `G_{t-H}`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;

/// `T x N` observations sampled every `step_minutes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFrame {
    values: Matrix,
    step_minutes: f64,
    /// Optional start timestamp (seconds since the Unix epoch).
    pub t0: Option<i64>,
    start_index: usize,
}

impl SeriesFrame {
    /// Wrap a `T x N` matrix. Rows with NaN or infinite entries are rejected
    /// and reported by index.
    pub fn new(values: Matrix, step_minutes: f64) -> Result<Self> {
        if values.cols() == 0 {
            return Err(Error::Validation("frame has no sensors".into()));
        }
        if !(step_minutes > 0.0 && step_minutes.is_finite()) {
            return Err(Error::Validation(alloc::format!(
                "step_minutes must be positive, got {step_minutes}"
            )));
        }
        let bad: Vec<usize> = values
            .row_iter()
            .enumerate()
            .filter(|(_, r)| r.iter().any(|v| !v.is_finite()))
            .map(|(i, _)| i)
            .collect();
        if !bad.is_empty() {
            return Err(Error::NonFinite { rows: bad });
        }
        Ok(Self {
            values,
            step_minutes,
            t0: None,
            start_index: 0,
        })
    }

    /// Observation matrix.
    pub fn values(&self) -> &Matrix {
        &self.values
    }

    /// Number of time steps `T`.
    pub fn len(&self) -> usize {
        self.values.rows()
    }

    /// True when the frame holds no rows.
    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    /// Number of sensors `N`.
    pub fn sensors(&self) -> usize {
        self.values.cols()
    }

    /// Sampling interval in minutes.
    pub fn step_minutes(&self) -> f64 {
        self.step_minutes
    }

    /// Row offset of this frame inside the series it was split from.
    pub fn start_index(&self) -> usize {
        self.start_index
    }

    /// Row `t`.
    pub fn row(&self, t: usize) -> &[f64] {
        self.values.row(t)
    }

    fn segment(&self, start: usize, end: usize) -> Self {
        Self {
            values: self.values.slice_rows(start, end),
            step_minutes: self.step_minutes,
            t0: self
                .t0
                .map(|t| t + (start as f64 * self.step_minutes * 60.0) as i64),
            start_index: self.start_index + start,
        }
    }
}

/// Segment sizes `(train, val, test)` for `t` rows.
pub fn split_sizes(t: usize, train_frac: f64, val_frac: f64) -> Result<(usize, usize, usize)> {
    if !(train_frac > 0.0 && val_frac > 0.0 && train_frac + val_frac < 1.0) {
        return Err(Error::Validation(alloc::format!(
            "split fractions must be positive with sum < 1, got {train_frac} and {val_frac}"
        )));
    }
    // The small offset keeps e.g. 100 * 0.29 from flooring to 28.
    let train = math::floor(t as f64 * train_frac + 1e-9) as usize;
    let val = math::floor(t as f64 * val_frac + 1e-9) as usize;
    let test = t.saturating_sub(train + val);
    if train == 0 || val == 0 || test == 0 {
        return Err(Error::Split { train, val, test });
    }
    Ok((train, val, test))
}

/// Contiguous, order-preserving train/validation/test split.
pub fn chronological_split(
    frame: &SeriesFrame,
    train_frac: f64,
    val_frac: f64,
) -> Result<(SeriesFrame, SeriesFrame, SeriesFrame)> {
    let (train, val, _) = split_sizes(frame.len(), train_frac, val_frac)?;
    Ok((
        frame.segment(0, train),
        frame.segment(train, train + val),
        frame.segment(train + val, frame.len()),
    ))
}

/// Window `lag` steps further into the past, padding slots that fall off
/// the end with the mean of the `H` in-window observations.
///
/// `shift_with_mean(w, 1)[h] = w[h + 1]` for `h < H - 1` and
/// `shift_with_mean(w, 1)[H - 1] = mean_h w[h]`. `lag = 0` returns a copy.
pub fn shift_with_mean(window: &Matrix, lag: usize) -> Matrix {
    let (h, n) = window.shape();
    let mean = window.col_means();
    let mut out = Matrix::zeros(h, n);
    for r in 0..h {
        let src = r + lag;
        if src < h {
            out.row_mut(r).copy_from_slice(window.row(src));
        } else {
            out.row_mut(r).copy_from_slice(&mean);
        }
    }
    out
}

/// Supervised windows for one horizon step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSet {
    /// `B` windows of shape `H x N`, newest lag first.
    pub inputs: Vec<Matrix>,
    /// Each input shifted one step into the past with the mean pad.
    pub inputs_shifted: Vec<Matrix>,
    /// Each input shifted two steps into the past (used by VAR(2)).
    pub inputs_shifted2: Vec<Matrix>,
    /// `B x N`, `G_{t-1}` per window.
    pub anchors: Matrix,
    /// `B x N`, `G_{t+p}` per window.
    pub targets: Matrix,
    /// Zero-based horizon step `p`.
    pub horizon_step: usize,
    /// Row offset (in the source frame's numbering) of the first target.
    pub first_target_index: usize,
}

impl WindowSet {
    /// Number of windows `B`.
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    /// True when there are no windows.
    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// History length `H`.
    pub fn history(&self) -> usize {
        self.inputs.first().map_or(0, Matrix::rows)
    }

    /// Number of sensors `N`.
    pub fn sensors(&self) -> usize {
        self.targets.cols()
    }

    /// Shifted window for VAR lag `lag` (1 or 2) of window `b`.
    pub fn shifted(&self, b: usize, lag: usize) -> &Matrix {
        match lag {
            1 => &self.inputs_shifted[b],
            2 => &self.inputs_shifted2[b],
            _ => panic!("shifted windows exist for lags 1 and 2"),
        }
    }
}

/// Build `B = T - H - p` windows. Window `b` uses `t = H + b`: inputs are
/// rows `t-1, ..., t-H` and the target is row `t + p`.
pub fn make_windows(frame: &SeriesFrame, history: usize, horizon_step: usize) -> Result<WindowSet> {
    if history < 2 {
        return Err(Error::Validation(alloc::format!(
            "history must be at least 2, got {history}"
        )));
    }
    let t_len = frame.len();
    let needed = history + horizon_step + 1;
    if t_len < needed {
        return Err(Error::Window {
            needed,
            available: t_len,
        });
    }
    let n = frame.sensors();
    let b_len = t_len - history - horizon_step;
    let mut inputs = Vec::with_capacity(b_len);
    let mut shifted = Vec::with_capacity(b_len);
    let mut shifted2 = Vec::with_capacity(b_len);
    let mut anchors = Matrix::zeros(b_len, n);
    let mut targets = Matrix::zeros(b_len, n);
    for b in 0..b_len {
        let t = history + b;
        let mut w = Matrix::zeros(history, n);
        for h in 0..history {
            w.row_mut(h).copy_from_slice(frame.row(t - 1 - h));
        }
        anchors.row_mut(b).copy_from_slice(w.row(0));
        targets
            .row_mut(b)
            .copy_from_slice(frame.row(t + horizon_step));
        shifted.push(shift_with_mean(&w, 1));
        shifted2.push(shift_with_mean(&w, 2));
        inputs.push(w);
    }
    Ok(WindowSet {
        inputs,
        inputs_shifted: shifted,
        inputs_shifted2: shifted2,
        anchors,
        targets,
        horizon_step,
        first_target_index: frame.start_index() + history + horizon_step,
    })
}

/// Zero-based horizon step for a horizon in minutes (15 min at 5-min steps -> 2).
pub fn horizon_step_for(minutes: f64, step_minutes: f64) -> Result<usize> {
    let steps = minutes / step_minutes;
    let rounded = math::floor(steps + 0.5);
    if rounded < 1.0 || math::abs(steps - rounded) > 1e-9 {
        return Err(Error::Validation(alloc::format!(
            "horizon {minutes} min is not a positive multiple of the {step_minutes} min step"
        )));
    }
    Ok(rounded as usize - 1)
}

/// Normalization mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeMode {
    /// Identity transform.
    #[default]
    None,
    /// Per-sensor z-score fitted on the training split.
    Zscore,
}

/// Per-sensor affine normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    /// Mode this normalizer was fitted with.
    pub mode: NormalizeMode,
    /// Per-sensor means (zeros for `None`).
    pub means: Vec<f64>,
    /// Per-sensor standard deviations (ones for `None`, 1 for constant sensors).
    pub stds: Vec<f64>,
}

impl Normalizer {
    /// Fit on a (training) frame. Population standard deviation is used.
    pub fn fit(frame: &SeriesFrame, mode: NormalizeMode) -> Self {
        let n = frame.sensors();
        match mode {
            NormalizeMode::None => Self {
                mode,
                means: vec![0.0; n],
                stds: vec![1.0; n],
            },
            NormalizeMode::Zscore => {
                let means = frame.values().col_means();
                let mut var = vec![0.0; n];
                for row in frame.values().row_iter() {
                    for ((v, &x), &m) in var.iter_mut().zip(row).zip(&means) {
                        *v += (x - m) * (x - m);
                    }
                }
                let t = frame.len().max(1) as f64;
                let stds = var
                    .iter()
                    .map(|&v| {
                        let s = math::sqrt(v / t);
                        if s > 0.0 {
                            s
                        } else {
                            1.0
                        }
                    })
                    .collect();
                Self { mode, means, stds }
            }
        }
    }

    /// Identity normalizer for `n` sensors.
    pub fn identity(n: usize) -> Self {
        Self {
            mode: NormalizeMode::None,
            means: vec![0.0; n],
            stds: vec![1.0; n],
        }
    }

    /// Normalize a `T x N` matrix.
    pub fn transform_matrix(&self, m: &Matrix) -> Matrix {
        let mut out = m.clone();
        for t in 0..out.rows() {
            for ((v, &mu), &s) in out.row_mut(t).iter_mut().zip(&self.means).zip(&self.stds) {
                *v = (*v - mu) / s;
            }
        }
        out
    }

    /// Undo [`Normalizer::transform_matrix`].
    pub fn inverse_matrix(&self, m: &Matrix) -> Matrix {
        let mut out = m.clone();
        for t in 0..out.rows() {
            for ((v, &mu), &s) in out.row_mut(t).iter_mut().zip(&self.means).zip(&self.stds) {
                *v = *v * s + mu;
            }
        }
        out
    }

    /// Normalize a frame, keeping its metadata.
    pub fn transform(&self, frame: &SeriesFrame) -> SeriesFrame {
        SeriesFrame {
            values: self.transform_matrix(&frame.values),
            ..frame.clone()
        }
    }

    /// Undo [`Normalizer::transform`].
    pub fn inverse(&self, frame: &SeriesFrame) -> SeriesFrame {
        SeriesFrame {
            values: self.inverse_matrix(&frame.values),
            ..frame.clone()
        }
    }
}
