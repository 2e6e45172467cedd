//! Synthetic series with a known graph-filter signal and VAR(1) errors.
//!
//! The generator simulates
//!
//! ```text
//! eta_t = Phi* eta_{t-1} + eps_t,          eps_t ~ N(0, Sigma)
//! x_t   = level + f*(x_{t-1} - level, ..., x_{t-L} - level) + eta_t
//! f*(d) = sum_h a_h d_h + b_h A d_h  (+ q * d_1^2 elementwise)
//! ```
//!
//! where `A` is the symmetric normalized adjacency and `(a_h, b_h)` are the
//! signal taps. The best one-step predictor is `f*(history) + Phi* eta_{t-1}`
//! and its residual is `eps_t`, so the achievable RMSE is
//! `sqrt(trace(Sigma) / N)`.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::adjust::power_iteration_radius;
use crate::data::SeriesFrame;
use crate::error::{Error, Result};
use crate::graph::{structural_mask, SensorGraph};
use crate::linalg::Matrix;
use crate::math;
use crate::rng::SeededRng;

/// Steps simulated and discarded before the first recorded row.
pub const BURN_IN: usize = 200;

/// Graph family for a synthetic run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GraphSpec {
    /// Path graph on `n` sensors.
    Path {
        /// Number of sensors.
        n: usize,
    },
    /// Ring graph on `n` sensors.
    Ring {
        /// Number of sensors.
        n: usize,
    },
    /// Undirected Erdos-Renyi graph.
    ErdosRenyi {
        /// Number of sensors.
        n: usize,
        /// Edge probability.
        p_edge: f64,
        /// Seed for the edge draws.
        seed: u64,
    },
}

impl GraphSpec {
    /// Build the graph.
    pub fn build(&self) -> SensorGraph {
        match *self {
            GraphSpec::Path { n } => SensorGraph::path(n),
            GraphSpec::Ring { n } => SensorGraph::ring(n),
            GraphSpec::ErdosRenyi { n, p_edge, seed } => SensorGraph::erdos_renyi(n, p_edge, seed),
        }
    }

    /// Number of sensors.
    pub fn n(&self) -> usize {
        match *self {
            GraphSpec::Path { n } | GraphSpec::Ring { n } | GraphSpec::ErdosRenyi { n, .. } => n,
        }
    }
}

/// Innovation covariance `Sigma`, restricted to diagonal forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NoiseScale {
    /// `sigma^2 I`.
    Isotropic {
        /// Standard deviation.
        sigma: f64,
    },
    /// `diag(variances)`.
    Diagonal {
        /// Per-sensor variances.
        variances: Vec<f64>,
    },
}

impl NoiseScale {
    /// Per-sensor standard deviations.
    pub fn std_devs(&self, n: usize) -> Vec<f64> {
        match self {
            NoiseScale::Isotropic { sigma } => vec![*sigma; n],
            NoiseScale::Diagonal { variances } => {
                variances.iter().map(|v| math::sqrt(*v)).collect()
            }
        }
    }

    /// `trace(Sigma)`.
    pub fn trace(&self, n: usize) -> f64 {
        match self {
            NoiseScale::Isotropic { sigma } => sigma * sigma * n as f64,
            NoiseScale::Diagonal { variances } => variances.iter().sum(),
        }
    }
}

/// Signal tap for one lag: `a` on the sensor itself, `b` on its normalized
/// neighborhood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tap {
    /// Self coefficient.
    pub a: f64,
    /// Neighbor coefficient.
    pub b: f64,
}

/// Full description of a synthetic run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Sensor graph.
    pub graph: GraphSpec,
    /// Recorded steps (after burn-in).
    pub t: usize,
    /// Signal taps, most recent lag first.
    pub taps: Vec<Tap>,
    /// Constant level added to every sensor.
    pub level: f64,
    /// Coefficient of the elementwise squared lag-1 deviation (0 for a linear signal).
    pub quadratic: f64,
    /// True error coefficient matrix `Phi*`.
    pub phi_star: Matrix,
    /// Innovation covariance.
    pub noise: NoiseScale,
    /// If set, `Phi*` must vanish wherever the structural mask of this order is 1.
    pub mask_order: Option<usize>,
    /// Sampling interval recorded in the frame.
    pub step_minutes: f64,
    /// Seed for the innovations.
    pub seed: u64,
}

impl SynthConfig {
    /// Isotropic configuration with no error coupling.
    pub fn new(graph: GraphSpec, t: usize, taps: Vec<Tap>, sigma: f64, seed: u64) -> Self {
        let n = graph.n();
        Self {
            graph,
            t,
            taps,
            level: 0.0,
            quadratic: 0.0,
            phi_star: Matrix::zeros(n, n),
            noise: NoiseScale::Isotropic { sigma },
            mask_order: Some(1),
            step_minutes: 5.0,
            seed,
        }
    }

    /// Check the configuration and return the built graph.
    pub fn validate(&self) -> Result<SensorGraph> {
        let graph = self.graph.build();
        let n = graph.n();
        if n == 0 || self.t == 0 {
            return Err(Error::RejectedConfig(
                "need at least one sensor and one step".into(),
            ));
        }
        if self.taps.is_empty() {
            return Err(Error::RejectedConfig(
                "signal needs at least one tap".into(),
            ));
        }
        if self.phi_star.shape() != (n, n) {
            return Err(Error::RejectedConfig(alloc::format!(
                "phi_star is {}x{}, graph has {n} sensors",
                self.phi_star.rows(),
                self.phi_star.cols()
            )));
        }
        if !self.phi_star.is_finite() {
            return Err(Error::RejectedConfig(
                "phi_star has non-finite entries".into(),
            ));
        }
        match &self.noise {
            NoiseScale::Isotropic { sigma } if !(sigma.is_finite() && *sigma >= 0.0) => {
                return Err(Error::RejectedConfig(alloc::format!(
                    "sigma = {sigma} must be finite and >= 0"
                )));
            }
            NoiseScale::Diagonal { variances }
                if variances.len() != n
                    || variances.iter().any(|v| !(v.is_finite() && *v >= 0.0)) =>
            {
                return Err(Error::RejectedConfig(alloc::format!(
                    "need {n} finite nonnegative variances"
                )));
            }
            _ => {}
        }
        let radius = power_iteration_radius(&self.phi_star);
        if radius.value >= 1.0 {
            return Err(Error::RejectedConfig(alloc::format!(
                "phi_star spectral radius {} is not below 1",
                radius.value
            )));
        }
        if let Some(order) = self.mask_order {
            let mask = structural_mask(&graph, order)?;
            for i in 0..n {
                for j in 0..n {
                    if mask.is_masked(i, j) && self.phi_star[(i, j)] != 0.0 {
                        return Err(Error::RejectedConfig(alloc::format!(
                            "phi_star[{i},{j}] couples sensors outside the order-{order} neighborhood"
                        )));
                    }
                }
            }
        }
        Ok(graph)
    }
}

/// Output of [`generate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthBundle {
    /// Observed series (`T x N`).
    pub frame: SeriesFrame,
    /// True error process `eta` aligned with the frame rows.
    pub eta: Matrix,
    /// Innovations `eps` aligned with the frame rows.
    pub innovations: Matrix,
    /// `eta` at the step before the first recorded row.
    pub eta_before: Vec<f64>,
    /// The sensor graph.
    pub graph: SensorGraph,
    /// True error coefficients.
    pub phi_star: Matrix,
    /// Analytic one-step RMSE floor.
    pub floor: f64,
    /// The configuration that produced this bundle.
    pub config: SynthConfig,
}

/// Deterministic signal part `f*` given deviations, most recent first.
struct Signal {
    taps: Vec<Tap>,
    quadratic: f64,
    norm_adj: Matrix,
}

impl Signal {
    fn new(cfg: &SynthConfig, graph: &SensorGraph) -> Self {
        Self {
            taps: cfg.taps.clone(),
            quadratic: cfg.quadratic,
            norm_adj: graph.normalized_adjacency(),
        }
    }

    /// `level + f*(x_{r-1} - level, ..., x_{r-L} - level)`; needs `r >= L`.
    fn predict_level(&self, frame: &SeriesFrame, r: usize, level: f64, out: &mut [f64]) {
        let devs: VecDeque<Vec<f64>> = (1..=self.taps.len())
            .map(|h| frame.row(r - h).iter().map(|x| x - level).collect())
            .collect();
        self.eval(&devs, out);
        out.iter_mut().for_each(|v| *v += level);
    }

    fn eval(&self, devs: &VecDeque<Vec<f64>>, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (tap, d) in self.taps.iter().zip(devs.iter()) {
            for (o, x) in out.iter_mut().zip(d) {
                *o += tap.a * x;
            }
            if tap.b != 0.0 {
                self.norm_adj.matvec_acc(d, tap.b, out);
            }
        }
        if self.quadratic != 0.0 {
            if let Some(d1) = devs.front() {
                for (o, x) in out.iter_mut().zip(d1) {
                    *o += self.quadratic * x * x;
                }
            }
        }
    }
}

/// Simulate the process described by `cfg`.
pub fn generate(cfg: &SynthConfig) -> Result<SynthBundle> {
    let graph = cfg.validate()?;
    let n = graph.n();
    let signal = Signal::new(cfg, &graph);
    let std = cfg.noise.std_devs(n);
    let mut rng = SeededRng::new(cfg.seed);
    let total = BURN_IN + cfg.t;

    let mut devs: VecDeque<Vec<f64>> = (0..cfg.taps.len()).map(|_| vec![0.0; n]).collect();
    let mut eta = vec![0.0; n];
    let mut eta_next = vec![0.0; n];
    let mut eps = vec![0.0; n];
    let mut fstar = vec![0.0; n];

    let mut values = Matrix::zeros(cfg.t, n);
    let mut eta_rec = Matrix::zeros(cfg.t, n);
    let mut eps_rec = Matrix::zeros(cfg.t, n);
    let mut eta_before = vec![0.0; n];

    for step in 0..total {
        for (e, s) in eps.iter_mut().zip(&std) {
            *e = s * rng.normal();
        }
        cfg.phi_star.matvec_into(&eta, &mut eta_next);
        for (v, e) in eta_next.iter_mut().zip(&eps) {
            *v += e;
        }
        signal.eval(&devs, &mut fstar);
        let dev: Vec<f64> = fstar.iter().zip(&eta_next).map(|(f, e)| f + e).collect();
        if dev.iter().any(|v| !v.is_finite()) {
            return Err(Error::RejectedConfig(alloc::format!(
                "simulation diverged at step {step}"
            )));
        }
        if step + 1 == BURN_IN {
            eta_before.copy_from_slice(&eta_next);
        }
        if step >= BURN_IN {
            let r = step - BURN_IN;
            for (x, d) in values.row_mut(r).iter_mut().zip(&dev) {
                *x = cfg.level + d;
            }
            eta_rec.row_mut(r).copy_from_slice(&eta_next);
            eps_rec.row_mut(r).copy_from_slice(&eps);
        }
        core::mem::swap(&mut eta, &mut eta_next);
        devs.pop_back();
        devs.push_front(dev);
    }

    let frame = SeriesFrame::new(values, cfg.step_minutes)?;
    Ok(SynthBundle {
        frame,
        eta: eta_rec,
        innovations: eps_rec,
        eta_before,
        graph,
        phi_star: cfg.phi_star.clone(),
        floor: oracle_floor(cfg),
        config: cfg.clone(),
    })
}

/// `sqrt(trace(Sigma) / N)`.
pub fn oracle_floor(cfg: &SynthConfig) -> f64 {
    let n = cfg.graph.n();
    math::sqrt(cfg.noise.trace(n) / n as f64)
}

/// One-step predictions of the optimal predictor `f*(history) + Phi* eta_{t-1}`.
///
/// Rows are aligned with frame rows `first..T` where `first` is the number of
/// signal taps; the returned pair is `(first, predictions)`.
pub fn oracle_predictions(bundle: &SynthBundle) -> Result<(usize, Matrix)> {
    let cfg = &bundle.config;
    let lags = cfg.taps.len();
    let t = bundle.frame.len();
    if t <= lags {
        return Err(Error::Window {
            needed: lags + 1,
            available: t,
        });
    }
    let signal = Signal::new(cfg, &bundle.graph);
    let mut out = Matrix::zeros(t - lags, bundle.graph.n());
    for r in lags..t {
        let row = out.row_mut(r - lags);
        signal.predict_level(&bundle.frame, r, cfg.level, row);
        bundle.phi_star.matvec_acc(bundle.eta.row(r - 1), 1.0, row);
    }
    Ok((lags, out))
}

/// Oracle predictions for any frame produced by `cfg`, recovering
/// `eta_{t-1}` from the frame itself as `x_{t-1} - level - f*(history)`.
///
/// Rows are aligned with frame rows `first..T`, `first = taps + 1`.
pub fn oracle_predictions_from_frame(
    cfg: &SynthConfig,
    frame: &SeriesFrame,
) -> Result<(usize, Matrix)> {
    let graph = cfg.validate()?;
    let n = graph.n();
    if frame.sensors() != n {
        return Err(crate::error::shape_err(
            "oracle frame",
            (frame.len(), n),
            (frame.len(), frame.sensors()),
        ));
    }
    let lags = cfg.taps.len();
    let first = lags + 1;
    let t = frame.len();
    if t <= first {
        return Err(Error::Window {
            needed: first + 1,
            available: t,
        });
    }
    let signal = Signal::new(cfg, &graph);
    let mut out = Matrix::zeros(t - first, n);
    let mut prev = vec![0.0; n];
    for r in first..t {
        signal.predict_level(frame, r - 1, cfg.level, &mut prev);
        let eta_prev: Vec<f64> = frame
            .row(r - 1)
            .iter()
            .zip(&prev)
            .map(|(x, p)| x - p)
            .collect();
        let row = out.row_mut(r - first);
        signal.predict_level(frame, r, cfg.level, row);
        cfg.phi_star.matvec_acc(&eta_prev, 1.0, row);
    }
    Ok((first, out))
}

/// Lower-triangular `Phi*` supported on the graph: diagonal `+/- radius`
/// with random signs, and `+/- coupling` on each edge `(i, j)` with `j < i`.
///
/// The spectral radius equals `radius` because the matrix is triangular.
pub fn random_structural_phi(graph: &SensorGraph, radius: f64, coupling: f64, seed: u64) -> Matrix {
    let n = graph.n();
    let mut rng = SeededRng::new(seed);
    let mut phi = Matrix::zeros(n, n);
    for i in 0..n {
        phi[(i, i)] = radius * rng.sign();
        for j in 0..i {
            if graph.has_edge(i, j) {
                phi[(i, j)] = coupling * rng.sign();
            }
        }
    }
    phi
}

/// Mask by breadth-first search: 1 iff the hop distance exceeds `order` and
/// `i != j`. Edges are followed in their stored direction `i -> j`.
pub fn bfs_mask_oracle(graph: &SensorGraph, order: usize) -> Matrix {
    let n = graph.n();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i && graph.has_edge(i, j)).collect())
        .collect();
    let mut mask = Matrix::filled(n, n, 1.0);
    for src in 0..n {
        let mut dist = vec![usize::MAX; n];
        dist[src] = 0;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            if dist[u] == order {
                continue;
            }
            for &v in &neighbors[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for (j, d) in dist.iter().enumerate() {
            if *d != usize::MAX {
                mask[(src, j)] = 0.0;
            }
        }
    }
    mask
}
