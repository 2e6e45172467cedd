//! Error models, their regularizers, and the adjusted loss and inference.
//!
//! For VAR order 1 the adjusted one-step prediction is
//!
//! ```text
//! G*_t = Phi G_{t-1} + f(G_{t-1} - Phi G_{t-2}, ..., G_{t-H} - Phi Gbar; theta)
//! ```
//!
//! where `Gbar` is the mean of the `H` in-window observations. VAR order 2
//! extends this lag-wise: the transformed row `h` is
//! `w[h] - Phi_1 s1[h] - Phi_2 s2[h]` and the anchor term is
//! `Phi_1 G_{t-1} + Phi_2 G_{t-2}`.
//!
//! The training loss is the mean squared residual over batch and sensors
//! plus `alpha * R`, where `R` depends on the parameterization:
//!
//! | kind | `Phi` | `R` |
//! |------|-------|-----|
//! | scalar | `mu I` | `max(0, abs(mu) - 1)` |
//! | diagonal | `diag(v)` | `sum_i max(0, abs(v_i) - 1)` |
//! | sparse_full | `Phi` | `sum abs(Phi_ij)` |
//! | low_rank | `P Q` | `norm(P) + norm(Q)` (Frobenius) |
//! | low_rank_sparse | `P Q + S` | `norm(P) + norm(Q) + (beta / alpha) sum abs(S_ij)` |
//! | structural | `Phi` | `norm(M . Phi)` (Frobenius, optionally squared) |
//!
//! `R` is summed over VAR lags. Subgradients use `sign(0) = 0` and a zero
//! slope at hinge kinks and at the origin of a norm.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::WindowSet;
use crate::error::{shape_err, Error, Result};
use crate::forecaster::Forecaster;
use crate::graph::StructuralMask;
use crate::linalg::{norm2, Matrix};
use crate::math;
use crate::rng::SeededRng;

/// Parameterization of the coefficient matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// One shared temporal coefficient.
    Scalar,
    /// Per-sensor temporal coefficients.
    Diagonal,
    /// Dense matrix with an l1 penalty.
    SparseFull,
    /// `P Q` with `P: N x k`, `Q: k x N`.
    LowRank,
    /// `P Q + S`.
    LowRankSparse,
    /// Dense matrix penalized outside the graph neighborhood.
    Structural,
}

impl ErrorKind {
    /// All six kinds, in table order.
    pub const ALL: [ErrorKind; 6] = [
        ErrorKind::Scalar,
        ErrorKind::Diagonal,
        ErrorKind::SparseFull,
        ErrorKind::LowRank,
        ErrorKind::LowRankSparse,
        ErrorKind::Structural,
    ];

    /// Stable snake_case name.
    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::Scalar => "scalar",
            ErrorKind::Diagonal => "diagonal",
            ErrorKind::SparseFull => "sparse_full",
            ErrorKind::LowRank => "low_rank",
            ErrorKind::LowRankSparse => "low_rank_sparse",
            ErrorKind::Structural => "structural",
        }
    }

    /// Parse a name produced by [`ErrorKind::name`].
    pub fn parse(s: &str) -> Result<Self> {
        ErrorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(alloc::format!("unknown error-model kind `{s}`")))
    }

    /// Whether the kind has low-rank factors.
    pub fn is_low_rank(self) -> bool {
        matches!(self, ErrorKind::LowRank | ErrorKind::LowRankSparse)
    }

    fn block_len(self, n: usize, rank: usize) -> usize {
        match self {
            ErrorKind::Scalar => 1,
            ErrorKind::Diagonal => n,
            ErrorKind::SparseFull | ErrorKind::Structural => n * n,
            ErrorKind::LowRank => 2 * n * rank,
            ErrorKind::LowRankSparse => 2 * n * rank + n * n,
        }
    }
}

/// Penalty settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizerConfig {
    /// Penalty coefficient `alpha >= 0`.
    pub alpha: f64,
    /// Weight of the sparse part for `low_rank_sparse`.
    pub beta: f64,
    /// Rank `k` for the low-rank kinds.
    pub rank: usize,
    /// Use `norm(M . Phi)^2` instead of `norm(M . Phi)` for the structural kind.
    pub squared_structural_penalty: bool,
}

impl RegularizerConfig {
    /// Tuned defaults per kind: sparse alpha 100; scalar and diagonal
    /// alpha 1000; low-rank k 10, alpha 100; low-rank + sparse k 10,
    /// alpha 10, beta 1000; structural alpha 1000. `k` is capped at `n`.
    pub fn defaults_for(kind: ErrorKind, n: usize) -> Self {
        let (alpha, beta, rank) = match kind {
            ErrorKind::SparseFull => (100.0, 0.0, 0),
            ErrorKind::Scalar | ErrorKind::Diagonal => (1000.0, 0.0, 0),
            ErrorKind::LowRank => (100.0, 0.0, 10),
            ErrorKind::LowRankSparse => (10.0, 1000.0, 10),
            ErrorKind::Structural => (1000.0, 0.0, 0),
        };
        Self {
            alpha,
            beta,
            rank: rank.min(n),
            squared_structural_penalty: false,
        }
    }

    /// No penalty at all.
    pub fn none() -> Self {
        Self {
            alpha: 0.0,
            beta: 0.0,
            rank: 0,
            squared_structural_penalty: false,
        }
    }

    /// Check the settings against a kind and sensor count.
    pub fn validate(&self, kind: ErrorKind, n: usize) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(alloc::format!(
                "alpha must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(alloc::format!(
                "beta must be finite and >= 0, got {}",
                self.beta
            )));
        }
        if kind.is_low_rank() && (self.rank == 0 || self.rank > n) {
            return Err(Error::Config(alloc::format!(
                "rank must be in 1..={n}, got {}",
                self.rank
            )));
        }
        if kind == ErrorKind::LowRankSparse && self.alpha == 0.0 && self.beta > 0.0 {
            return Err(Error::Config(
                "low_rank_sparse weights the sparse part by beta/alpha; alpha must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Coefficient matrices `Phi_1..Phi_p` in one of six parameterizations.
///
/// All payload entries live in one flat vector so the trainer can update
/// them together with the forecaster parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    kind: ErrorKind,
    var_order: usize,
    n: usize,
    rank: usize,
    params: Vec<f64>,
    mask: Option<StructuralMask>,
}

impl ErrorModel {
    /// Model with every payload entry zero.
    pub fn zeros(kind: ErrorKind, var_order: usize, n: usize, rank: usize) -> Result<Self> {
        if !(1..=2).contains(&var_order) {
            return Err(Error::Config(alloc::format!(
                "VAR order must be 1 or 2, got {var_order}"
            )));
        }
        let rank = if kind.is_low_rank() {
            if rank == 0 || rank > n {
                return Err(Error::Config(alloc::format!(
                    "rank must be in 1..={n}, got {rank}"
                )));
            }
            rank
        } else {
            0
        };
        let len = kind.block_len(n, rank) * var_order;
        Ok(Self {
            kind,
            var_order,
            n,
            rank,
            params: vec![0.0; len],
            mask: None,
        })
    }

    /// Training start point: all zero except the low-rank `P` factors, drawn
    /// from `N(0, 1e-3^2)`. `Q` starts at zero, so every `Phi` is exactly zero.
    pub fn new(
        kind: ErrorKind,
        var_order: usize,
        n: usize,
        rank: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut em = Self::zeros(kind, var_order, n, rank)?;
        if kind.is_low_rank() {
            let mut rng = SeededRng::new(seed);
            let block = kind.block_len(n, em.rank);
            for lag in 0..var_order {
                for v in &mut em.params[lag * block..lag * block + n * em.rank] {
                    *v = 1e-3 * rng.normal();
                }
            }
        }
        Ok(em)
    }

    /// Attach the structural mask (required for [`ErrorKind::Structural`]).
    pub fn with_mask(mut self, mask: StructuralMask) -> Result<Self> {
        if mask.n() != self.n {
            return Err(shape_err(
                "ErrorModel mask",
                (self.n, self.n),
                (mask.n(), mask.n()),
            ));
        }
        self.mask = Some(mask);
        Ok(self)
    }

    /// Parameterization.
    pub fn kind(&self) -> ErrorKind {
        self.kind
    }

    /// VAR order `p` (1 or 2).
    pub fn var_order(&self) -> usize {
        self.var_order
    }

    /// Number of sensors.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Rank of the low-rank factors (0 for other kinds).
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Attached mask, if any.
    pub fn mask(&self) -> Option<&StructuralMask> {
        self.mask.as_ref()
    }

    /// Flat payload.
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable flat payload.
    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn block_len(&self) -> usize {
        self.kind.block_len(self.n, self.rank)
    }

    fn block(&self, lag: usize) -> &[f64] {
        let b = self.block_len();
        &self.params[lag * b..(lag + 1) * b]
    }

    /// Mutable payload block for one VAR lag.
    pub fn block_mut(&mut self, lag: usize) -> Result<&mut [f64]> {
        self.check_lag(lag)?;
        let b = self.block_len();
        Ok(&mut self.params[lag * b..(lag + 1) * b])
    }

    fn check_lag(&self, lag: usize) -> Result<()> {
        if lag >= self.var_order {
            return Err(Error::LagOutOfRange {
                lag,
                order: self.var_order,
            });
        }
        Ok(())
    }

    /// Set `Phi_lag` directly. Only for `sparse_full` and `structural`.
    pub fn set_phi(&mut self, lag: usize, phi: &Matrix) -> Result<()> {
        if !matches!(self.kind, ErrorKind::SparseFull | ErrorKind::Structural) {
            return Err(Error::Config(alloc::format!(
                "set_phi is not available for kind {}",
                self.kind.name()
            )));
        }
        if phi.shape() != (self.n, self.n) {
            return Err(shape_err(
                "ErrorModel::set_phi",
                (self.n, self.n),
                phi.shape(),
            ));
        }
        self.block_mut(lag)?.copy_from_slice(phi.as_slice());
        Ok(())
    }

    /// The `N x N` coefficient matrix for VAR lag `lag` (zero based).
    pub fn materialize_phi(&self, lag: usize) -> Result<Matrix> {
        self.check_lag(lag)?;
        let n = self.n;
        let k = self.rank;
        let block = self.block(lag);
        Ok(match self.kind {
            ErrorKind::Scalar => Matrix::identity(n).scale(block[0]),
            ErrorKind::Diagonal => Matrix::from_diag(block),
            ErrorKind::SparseFull | ErrorKind::Structural => {
                Matrix::from_vec(n, n, block.to_vec())?
            }
            ErrorKind::LowRank | ErrorKind::LowRankSparse => {
                let p = Matrix::from_vec(n, k, block[..n * k].to_vec())?;
                let q = Matrix::from_vec(k, n, block[n * k..2 * n * k].to_vec())?;
                let pq = p.matmul(&q)?;
                if self.kind == ErrorKind::LowRankSparse {
                    pq.add(&Matrix::from_vec(n, n, block[2 * n * k..].to_vec())?)?
                } else {
                    pq
                }
            }
        })
    }

    /// All `Phi` matrices, lag 1 first.
    pub fn materialize_all(&self) -> Result<Vec<Matrix>> {
        (0..self.var_order)
            .map(|l| self.materialize_phi(l))
            .collect()
    }

    /// Chain rule from `dL/dPhi_lag` to the payload block of that lag,
    /// accumulated into `grad` (full payload length).
    pub fn pullback(&self, lag: usize, dphi: &Matrix, grad: &mut [f64]) -> Result<()> {
        self.check_lag(lag)?;
        if dphi.shape() != (self.n, self.n) {
            return Err(shape_err(
                "ErrorModel::pullback",
                (self.n, self.n),
                dphi.shape(),
            ));
        }
        let n = self.n;
        let k = self.rank;
        let b = self.block_len();
        let block = self.block(lag);
        let g = &mut grad[lag * b..(lag + 1) * b];
        match self.kind {
            ErrorKind::Scalar => g[0] += dphi.diag().iter().sum::<f64>(),
            ErrorKind::Diagonal => {
                for (gi, d) in g.iter_mut().zip(dphi.diag()) {
                    *gi += d;
                }
            }
            ErrorKind::SparseFull | ErrorKind::Structural => {
                for (gi, &d) in g.iter_mut().zip(dphi.as_slice()) {
                    *gi += d;
                }
            }
            ErrorKind::LowRank | ErrorKind::LowRankSparse => {
                let p = &block[..n * k];
                let q = &block[n * k..2 * n * k];
                // dP = dPhi Q^T, dQ = P^T dPhi
                for i in 0..n {
                    for r in 0..k {
                        let mut s = 0.0;
                        for j in 0..n {
                            s += dphi[(i, j)] * q[r * n + j];
                        }
                        g[i * k + r] += s;
                    }
                }
                for r in 0..k {
                    for j in 0..n {
                        let mut s = 0.0;
                        for i in 0..n {
                            s += p[i * k + r] * dphi[(i, j)];
                        }
                        g[n * k + r * n + j] += s;
                    }
                }
                if self.kind == ErrorKind::LowRankSparse {
                    for (gi, &d) in g[2 * n * k..].iter_mut().zip(dphi.as_slice()) {
                        *gi += d;
                    }
                }
            }
        }
        Ok(())
    }

    /// Regularizer value `R` (summed over lags) and its subgradient with
    /// respect to the payload.
    pub fn regularize(&self, cfg: &RegularizerConfig) -> Result<(f64, Vec<f64>)> {
        cfg.validate(self.kind, self.n)?;
        let mut grad = vec![0.0; self.params.len()];
        let mut value = 0.0;
        let b = self.block_len();
        let n = self.n;
        let k = self.rank;
        for lag in 0..self.var_order {
            let block = self.block(lag);
            let g = &mut grad[lag * b..(lag + 1) * b];
            match self.kind {
                ErrorKind::Scalar | ErrorKind::Diagonal => {
                    for (gi, &v) in g.iter_mut().zip(block) {
                        let excess = math::abs(v) - 1.0;
                        if excess > 0.0 {
                            value += excess;
                            *gi = math::sign(v);
                        }
                    }
                }
                ErrorKind::SparseFull => value += l1_with_grad(block, g, 1.0),
                ErrorKind::LowRank => {
                    value += norm_with_grad(&block[..n * k], &mut g[..n * k]);
                    value += norm_with_grad(&block[n * k..], &mut g[n * k..]);
                }
                ErrorKind::LowRankSparse => {
                    value += norm_with_grad(&block[..n * k], &mut g[..n * k]);
                    value += norm_with_grad(&block[n * k..2 * n * k], &mut g[n * k..2 * n * k]);
                    if cfg.beta > 0.0 {
                        let ratio = cfg.beta / cfg.alpha;
                        value += l1_with_grad(&block[2 * n * k..], &mut g[2 * n * k..], ratio);
                    }
                }
                ErrorKind::Structural => {
                    let mask = self.mask.as_ref().ok_or_else(|| {
                        Error::Config("structural error model has no mask".into())
                    })?;
                    let masked: Vec<f64> = block
                        .iter()
                        .zip(mask.matrix().as_slice())
                        .map(|(&v, &m)| v * m)
                        .collect();
                    if cfg.squared_structural_penalty {
                        value += masked.iter().map(|v| v * v).sum::<f64>();
                        for (gi, &v) in g.iter_mut().zip(&masked) {
                            *gi = 2.0 * v;
                        }
                    } else {
                        // masked is zero wherever M is zero, so the gradient
                        // M . Phi / norm already respects the mask.
                        value += norm_with_grad(&masked, g);
                    }
                }
            }
        }
        Ok((value, grad))
    }
}

fn l1_with_grad(x: &[f64], g: &mut [f64], weight: f64) -> f64 {
    let mut s = 0.0;
    for (gi, &v) in g.iter_mut().zip(x) {
        s += math::abs(v);
        *gi = weight * math::sign(v);
    }
    weight * s
}

fn norm_with_grad(x: &[f64], g: &mut [f64]) -> f64 {
    let nrm = norm2(x);
    if nrm > 0.0 {
        for (gi, &v) in g.iter_mut().zip(x) {
            *gi = v / nrm;
        }
    }
    nrm
}

/// Row `h` of the result is `window[h] - sum_l Phi_l shifted_l[h]`.
///
/// `shifted[l]` is the window moved `l + 1` steps into the past (see
/// [`crate::data::shift_with_mean`]); one entry is needed per VAR lag.
pub fn transform_window(window: &Matrix, shifted: &[&Matrix], phis: &[Matrix]) -> Result<Matrix> {
    if shifted.len() < phis.len() {
        return Err(Error::Validation(alloc::format!(
            "{} shifted windows supplied for VAR order {}",
            shifted.len(),
            phis.len()
        )));
    }
    let (h, n) = window.shape();
    for (s, phi) in shifted.iter().zip(phis) {
        if s.shape() != (h, n) {
            return Err(shape_err("transform_window shifted", (h, n), s.shape()));
        }
        if phi.shape() != (n, n) {
            return Err(shape_err("transform_window phi", (n, n), phi.shape()));
        }
    }
    let mut out = window.clone();
    transform_into(window, shifted, phis, &mut out);
    Ok(out)
}

fn transform_into(window: &Matrix, shifted: &[&Matrix], phis: &[Matrix], out: &mut Matrix) {
    out.as_mut_slice().copy_from_slice(window.as_slice());
    for (s, phi) in shifted.iter().zip(phis) {
        for r in 0..window.rows() {
            phi.matvec_acc(s.row(r), -1.0, out.row_mut(r));
        }
    }
}

/// Adjusted prediction `sum_l Phi_l G_{t-l} + f(transform_window(...))`.
pub fn saea_predict<F: Forecaster + ?Sized>(
    model: &F,
    em: &ErrorModel,
    window: &Matrix,
    shifted: &[&Matrix],
) -> Result<Vec<f64>> {
    model.check_window(window)?;
    if em.n() != model.sensors() {
        return Err(shape_err(
            "saea_predict error model",
            (model.sensors(), 0),
            (em.n(), 0),
        ));
    }
    let phis = em.materialize_all()?;
    let z = transform_window(window, shifted, &phis)?;
    let mut pred = model.forward(&z)?;
    for (l, phi) in phis.iter().enumerate() {
        phi.matvec_acc(window.row(l), 1.0, &mut pred);
    }
    Ok(pred)
}

/// Adjusted predictions for every window, `B x N`.
pub fn predict_windows<F: Forecaster + ?Sized>(
    model: &F,
    em: &ErrorModel,
    ws: &WindowSet,
) -> Result<Matrix> {
    check_batch(model, em, ws)?;
    let phis = em.materialize_all()?;
    let n = model.sensors();
    let mut out = Matrix::zeros(ws.len(), n);
    let mut z = Matrix::zeros(ws.history(), n);
    for b in 0..ws.len() {
        let shifted = shifted_refs(ws, b);
        transform_into(&ws.inputs[b], &shifted, &phis, &mut z);
        let row = out.row_mut(b);
        model.forward_into(&z, row);
        for (l, phi) in phis.iter().enumerate() {
            phi.matvec_acc(ws.inputs[b].row(l), 1.0, row);
        }
    }
    Ok(out)
}

fn shifted_refs(ws: &WindowSet, b: usize) -> [&Matrix; 2] {
    [&ws.inputs_shifted[b], &ws.inputs_shifted2[b]]
}

fn check_batch<F: Forecaster + ?Sized>(model: &F, em: &ErrorModel, ws: &WindowSet) -> Result<()> {
    if ws.is_empty() {
        return Err(Error::Validation("empty window set".into()));
    }
    let expected = (model.history(), model.sensors());
    if (ws.history(), ws.sensors()) != expected {
        return Err(shape_err(
            "window set",
            expected,
            (ws.history(), ws.sensors()),
        ));
    }
    if em.n() != model.sensors() {
        return Err(shape_err(
            "error model",
            (model.sensors(), model.sensors()),
            (em.n(), em.n()),
        ));
    }
    if em.var_order() > ws.history() {
        return Err(Error::Config(alloc::format!(
            "VAR order {} needs history >= {}",
            em.var_order(),
            em.var_order()
        )));
    }
    Ok(())
}

/// Value and gradients of the adjusted loss.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    /// `mse + alpha * R`.
    pub loss: f64,
    /// Mean squared residual over batch and sensors.
    pub mse: f64,
    /// `alpha * R`.
    pub penalty: f64,
    /// `dloss/dtheta`.
    pub grad_theta: Vec<f64>,
    /// `dloss/dpayload` (flat, same layout as [`ErrorModel::params`]).
    pub grad_payload: Vec<f64>,
}

/// Adjusted loss over every window of `batch`.
pub fn saea_loss<F: Forecaster + ?Sized>(
    model: &F,
    em: &ErrorModel,
    cfg: &RegularizerConfig,
    batch: &WindowSet,
) -> Result<LossEval> {
    let all: Vec<usize> = (0..batch.len()).collect();
    saea_loss_on(model, em, cfg, batch, &all)
}

/// Adjusted loss over the windows `indices` of `ws`.
///
/// Gradients flow through the anchor term `Phi G_{t-1}` and, via the
/// forecaster's input VJP, through the transformed window. Samples are
/// reduced in the order given, so results are reproducible bit for bit.
pub fn saea_loss_on<F: Forecaster + ?Sized>(
    model: &F,
    em: &ErrorModel,
    cfg: &RegularizerConfig,
    ws: &WindowSet,
    indices: &[usize],
) -> Result<LossEval> {
    check_batch(model, em, ws)?;
    if indices.is_empty() {
        return Err(Error::Validation("empty batch".into()));
    }
    let phis = em.materialize_all()?;
    let n = model.sensors();
    let h = model.history();
    let scale = 1.0 / (indices.len() * n) as f64;

    let mut grad_theta = vec![0.0; model.num_params()];
    let mut dphis: Vec<Matrix> = phis.iter().map(|_| Matrix::zeros(n, n)).collect();
    let mut z = Matrix::zeros(h, n);
    let mut gz = Matrix::zeros(h, n);
    let mut pred = vec![0.0; n];
    let mut cot = vec![0.0; n];
    let mut sse = 0.0;

    for &b in indices {
        let window = &ws.inputs[b];
        let shifted = shifted_refs(ws, b);
        transform_into(window, &shifted, &phis, &mut z);
        model.forward_into(&z, &mut pred);
        for (l, phi) in phis.iter().enumerate() {
            phi.matvec_acc(window.row(l), 1.0, &mut pred);
        }
        for ((c, &y), &p) in cot.iter_mut().zip(ws.targets.row(b)).zip(&pred) {
            let r = y - p;
            sse += r * r;
            *c = -2.0 * r * scale;
        }
        gz.as_mut_slice().fill(0.0);
        model.vjp_acc(&z, &cot, &mut grad_theta, &mut gz);
        for (l, dphi) in dphis.iter_mut().enumerate() {
            dphi.add_outer(&cot, window.row(l), 1.0);
            let s = shifted[l];
            for r in 0..h {
                dphi.add_outer(gz.row(r), s.row(r), -1.0);
            }
        }
    }

    let mse = sse * scale;
    let mut grad_payload = vec![0.0; em.params().len()];
    for (l, dphi) in dphis.iter().enumerate() {
        em.pullback(l, dphi, &mut grad_payload)?;
    }
    let mut penalty = 0.0;
    if cfg.alpha > 0.0 {
        let (r, dr) = em.regularize(cfg)?;
        penalty = cfg.alpha * r;
        for (g, d) in grad_payload.iter_mut().zip(dr) {
            *g += cfg.alpha * d;
        }
    } else {
        cfg.validate(em.kind(), em.n())?;
    }
    Ok(LossEval {
        loss: mse + penalty,
        mse,
        penalty,
        grad_theta,
        grad_payload,
    })
}

/// Result of the power-iteration spectral radius estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    /// Estimated largest eigenvalue modulus.
    pub value: f64,
    /// False when the iteration hit its cap before settling.
    pub converged: bool,
    /// Iterations used.
    pub iterations: usize,
}

/// Tolerance of [`spectral_radius`].
pub const SPECTRAL_TOL: f64 = 1e-8;
/// Iteration cap of [`spectral_radius`].
pub const SPECTRAL_MAX_ITER: usize = 10_000;

/// Spectral radius of the VAR companion matrix of `em`
/// (`Phi_1` itself for order 1; `[[Phi_1, Phi_2], [I, 0]]` for order 2).
pub fn spectral_radius(em: &ErrorModel) -> Result<SpectralEstimate> {
    let phis = em.materialize_all()?;
    Ok(companion_spectral_radius(&phis))
}

/// Spectral radius of the companion matrix built from `phis`.
pub fn companion_spectral_radius(phis: &[Matrix]) -> SpectralEstimate {
    let n = phis.first().map_or(0, Matrix::rows);
    let p = phis.len();
    if p == 1 {
        return power_iteration_radius(&phis[0]);
    }
    let mut c = Matrix::zeros(n * p, n * p);
    for (l, phi) in phis.iter().enumerate() {
        for i in 0..n {
            for j in 0..n {
                c[(i, l * n + j)] = phi[(i, j)];
            }
        }
    }
    for i in n..n * p {
        c[(i, i - n)] = 1.0;
    }
    power_iteration_radius(&c)
}

/// Largest eigenvalue modulus of a square matrix by power iteration.
///
/// Each iteration applies the matrix twice and estimates the radius as
/// `sqrt(norm(A^2 x))` for unit `x`, which also settles when the dominant
/// eigenvalues are a real `+/-` pair. Complex dominant pairs may not settle;
/// the last estimate is then returned with `converged = false`.
pub fn power_iteration_radius(a: &Matrix) -> SpectralEstimate {
    let n = a.rows();
    if n == 0 {
        return SpectralEstimate {
            value: 0.0,
            converged: true,
            iterations: 0,
        };
    }
    // Triangular matrices carry their eigenvalues on the diagonal. Power
    // iteration converges only polynomially on their repeated eigenvalues.
    if is_triangular(a) {
        let value = a.diag().iter().fold(0.0f64, |m, d| m.max(math::abs(*d)));
        return SpectralEstimate {
            value,
            converged: true,
            iterations: 0,
        };
    }
    // Fixed start vector with distinct entries, unlikely to be orthogonal to
    // the dominant eigenvector.
    let mut x: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.37 * ((i * 7919) % 113) as f64 / 113.0)
        .collect();
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut prev = f64::INFINITY;
    for it in 1..=SPECTRAL_MAX_ITER {
        a.matvec_into(&x, &mut y);
        a.matvec_into(&y, &mut z);
        let nz = norm2(&z);
        if nz == 0.0 {
            return SpectralEstimate {
                value: 0.0,
                converged: true,
                iterations: it,
            };
        }
        let est = math::sqrt(nz);
        if math::abs(est - prev) <= SPECTRAL_TOL * est.max(1.0) {
            return SpectralEstimate {
                value: est,
                converged: true,
                iterations: it,
            };
        }
        prev = est;
        for (xi, &zi) in x.iter_mut().zip(&z) {
            *xi = zi / nz;
        }
    }
    SpectralEstimate {
        value: prev,
        converged: false,
        iterations: SPECTRAL_MAX_ITER,
    }
}

fn is_triangular(a: &Matrix) -> bool {
    let n = a.rows();
    let lower = (0..n).all(|i| ((i + 1)..n).all(|j| a[(i, j)] == 0.0));
    let upper = (0..n).all(|i| (0..i).all(|j| a[(i, j)] == 0.0));
    lower || upper
}
