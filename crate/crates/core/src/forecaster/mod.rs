//! Differentiable one-step forecasters `f(window; theta)`.
//!
//! A forecaster maps an `H x N` window (newest lag first) to an `N`-vector
//! and exposes vector-Jacobian products with respect to both its flat
//! parameter vector and its input window. The input VJP is what lets the
//! adjusted loss differentiate through `f(G_{t-1} - Phi G_{t-2}, ...)`.
//!
//! Three concrete models are provided:
//!
//! - [`NodeAr`]: independent linear AR per sensor, `P = N (H + 1)`.
//! - [`GraphFilterAr`]: shared two-tap graph filter per lag plus per-sensor bias.
//! - [`Mlp`]: one `tanh` hidden layer over the flattened window.

mod graph_filter;
mod mlp;
mod node_ar;

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use graph_filter::GraphFilterAr;
pub use mlp::Mlp;
pub use node_ar::NodeAr;

use crate::error::{shape_err, Error, Result};
use crate::graph::SensorGraph;
use crate::linalg::Matrix;
use crate::rng::SeededRng;

/// Output of [`Forecaster::vjp`].
#[derive(Debug, Clone, PartialEq)]
pub struct VjpResult {
    /// Forward prediction, length `N`.
    pub value: Vec<f64>,
    /// `cotangent^T df/dtheta`, length `P`.
    pub grad_theta: Vec<f64>,
    /// `cotangent^T df/dinput`, shape `H x N`.
    pub grad_input: Matrix,
}

/// Contract shared by every base model.
pub trait Forecaster {
    /// Model family.
    fn kind(&self) -> ModelKind;
    /// History length `H`.
    fn history(&self) -> usize;
    /// Number of sensors `N`.
    fn sensors(&self) -> usize;
    /// Flat parameter vector.
    fn params(&self) -> &[f64];
    /// Mutable flat parameter vector.
    fn params_mut(&mut self) -> &mut [f64];

    /// Write `out = f(window)` without shape checks.
    fn forward_into(&self, window: &Matrix, out: &mut [f64]);

    /// Accumulate `cotangent^T J` into `grad_theta` and `grad_input` without
    /// shape checks.
    fn vjp_acc(
        &self,
        window: &Matrix,
        cotangent: &[f64],
        grad_theta: &mut [f64],
        grad_input: &mut Matrix,
    );

    /// Number of parameters `P`.
    fn num_params(&self) -> usize {
        self.params().len()
    }

    /// Replace the parameter vector.
    fn set_params(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.num_params() {
            return Err(shape_err(
                "Forecaster::set_params",
                (self.num_params(), 1),
                (theta.len(), 1),
            ));
        }
        self.params_mut().copy_from_slice(theta);
        Ok(())
    }

    /// Check that `window` is `H x N`.
    fn check_window(&self, window: &Matrix) -> Result<()> {
        let expected = (self.history(), self.sensors());
        if window.shape() != expected {
            return Err(shape_err("Forecaster window", expected, window.shape()));
        }
        Ok(())
    }

    /// Prediction for all sensors.
    fn forward(&self, window: &Matrix) -> Result<Vec<f64>> {
        self.check_window(window)?;
        let mut out = vec![0.0; self.sensors()];
        self.forward_into(window, &mut out);
        Ok(out)
    }

    /// Forward value plus both vector-Jacobian products.
    fn vjp(&self, window: &Matrix, cotangent: &[f64]) -> Result<VjpResult> {
        self.check_window(window)?;
        if cotangent.len() != self.sensors() {
            return Err(shape_err(
                "Forecaster cotangent",
                (self.sensors(), 1),
                (cotangent.len(), 1),
            ));
        }
        let value = self.forward(window)?;
        let mut grad_theta = vec![0.0; self.num_params()];
        let mut grad_input = Matrix::zeros(self.history(), self.sensors());
        self.vjp_acc(window, cotangent, &mut grad_theta, &mut grad_input);
        Ok(VjpResult {
            value,
            grad_theta,
            grad_input,
        })
    }
}

/// Base model family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// [`NodeAr`].
    NodeAr,
    /// [`GraphFilterAr`].
    GraphFilterAr,
    /// [`Mlp`].
    Mlp,
}

impl ModelKind {
    /// Stable lowercase name.
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::NodeAr => "node_ar",
            ModelKind::GraphFilterAr => "graph_filter_ar",
            ModelKind::Mlp => "mlp",
        }
    }

    /// Parse a name produced by [`ModelKind::name`].
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "node_ar" => Ok(ModelKind::NodeAr),
            "graph_filter_ar" => Ok(ModelKind::GraphFilterAr),
            "mlp" => Ok(ModelKind::Mlp),
            other => Err(Error::Config(alloc::format!(
                "unknown model kind `{other}`"
            ))),
        }
    }
}

/// Default hidden width of [`Mlp`].
pub const DEFAULT_HIDDEN: usize = 64;

/// Any of the built-in models, for serialization and runtime selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnyModel {
    /// Per-sensor AR.
    NodeAr(NodeAr),
    /// Graph filter AR.
    GraphFilterAr(GraphFilterAr),
    /// One-hidden-layer perceptron.
    Mlp(Mlp),
}

impl AnyModel {
    /// Seeded construction. `graph` is required for [`ModelKind::GraphFilterAr`].
    pub fn new(
        kind: ModelKind,
        history: usize,
        sensors: usize,
        graph: Option<&SensorGraph>,
        hidden: usize,
        seed: u64,
    ) -> Result<Self> {
        Ok(match kind {
            ModelKind::NodeAr => AnyModel::NodeAr(NodeAr::new(history, sensors, seed)),
            ModelKind::GraphFilterAr => {
                let g = graph.ok_or_else(|| {
                    Error::Config("graph_filter_ar needs an adjacency matrix".into())
                })?;
                if g.n() != sensors {
                    return Err(shape_err(
                        "GraphFilterAr graph",
                        (sensors, sensors),
                        (g.n(), g.n()),
                    ));
                }
                AnyModel::GraphFilterAr(GraphFilterAr::new(history, g, seed))
            }
            ModelKind::Mlp => AnyModel::Mlp(Mlp::new(history, sensors, hidden, seed)),
        })
    }

    fn inner(&self) -> &dyn Forecaster {
        match self {
            AnyModel::NodeAr(m) => m,
            AnyModel::GraphFilterAr(m) => m,
            AnyModel::Mlp(m) => m,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn Forecaster {
        match self {
            AnyModel::NodeAr(m) => m,
            AnyModel::GraphFilterAr(m) => m,
            AnyModel::Mlp(m) => m,
        }
    }
}

impl Forecaster for AnyModel {
    fn kind(&self) -> ModelKind {
        self.inner().kind()
    }
    fn history(&self) -> usize {
        self.inner().history()
    }
    fn sensors(&self) -> usize {
        self.inner().sensors()
    }
    fn params(&self) -> &[f64] {
        self.inner().params()
    }
    fn params_mut(&mut self) -> &mut [f64] {
        self.inner_mut().params_mut()
    }
    fn forward_into(&self, window: &Matrix, out: &mut [f64]) {
        self.inner().forward_into(window, out)
    }
    fn vjp_acc(
        &self,
        window: &Matrix,
        cotangent: &[f64],
        grad_theta: &mut [f64],
        grad_input: &mut Matrix,
    ) {
        self.inner()
            .vjp_acc(window, cotangent, grad_theta, grad_input)
    }
}

/// `uniform(-s, s)` draws with `s = 1 / sqrt(fan_in)`.
pub(crate) fn init_uniform(rng: &mut SeededRng, fan_in: usize, out: &mut [f64]) {
    let s = 1.0 / crate::math::sqrt(fan_in.max(1) as f64);
    for v in out {
        *v = rng.uniform_range(-s, s);
    }
}
