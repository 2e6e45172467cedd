use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{init_uniform, Forecaster, ModelKind};
use crate::graph::SensorGraph;
use crate::linalg::Matrix;
use crate::rng::SeededRng;

/// Linear spatial-temporal filter
/// `y = sum_h (c0_h I + c1_h A) x_h + b`, with `A = D^{-1/2} W D^{-1/2}`.
///
/// Parameter layout: `[c0_0..c0_{H-1}, c1_0..c1_{H-1}, b_0..b_{N-1}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFilterAr {
    history: usize,
    sensors: usize,
    /// Nonzero entries `(i, j, A_ij)` of the normalized adjacency, row-major.
    norm_adj: Vec<(usize, usize, f64)>,
    theta: Vec<f64>,
}

impl GraphFilterAr {
    /// Seeded taps, zero biases.
    pub fn new(history: usize, graph: &SensorGraph, seed: u64) -> Self {
        let mut m = Self::zeros(history, graph);
        let mut rng = SeededRng::new(seed);
        init_uniform(&mut rng, 2 * history, &mut m.theta[..2 * history]);
        m
    }

    /// All-zero parameters.
    pub fn zeros(history: usize, graph: &SensorGraph) -> Self {
        let a = graph.normalized_adjacency();
        let n = graph.n();
        let mut norm_adj = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if a[(i, j)] != 0.0 {
                    norm_adj.push((i, j, a[(i, j)]));
                }
            }
        }
        Self {
            history,
            sensors: n,
            norm_adj,
            theta: vec![0.0; 2 * history + n],
        }
    }

    /// Identity tap `c0_h`.
    pub fn self_tap_mut(&mut self, h: usize) -> &mut f64 {
        &mut self.theta[h]
    }

    /// Neighbor tap `c1_h`.
    pub fn neighbor_tap_mut(&mut self, h: usize) -> &mut f64 {
        &mut self.theta[self.history + h]
    }

    /// Per-sensor bias.
    pub fn bias_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.theta[2 * self.history + i]
    }

    /// Normalized adjacency as a dense matrix.
    pub fn normalized_adjacency(&self) -> Matrix {
        let mut a = Matrix::zeros(self.sensors, self.sensors);
        for &(i, j, v) in &self.norm_adj {
            a[(i, j)] = v;
        }
        a
    }
}

impl Forecaster for GraphFilterAr {
    fn kind(&self) -> ModelKind {
        ModelKind::GraphFilterAr
    }
    fn history(&self) -> usize {
        self.history
    }
    fn sensors(&self) -> usize {
        self.sensors
    }
    fn params(&self) -> &[f64] {
        &self.theta
    }
    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    fn forward_into(&self, window: &Matrix, out: &mut [f64]) {
        let hist = self.history;
        out.copy_from_slice(&self.theta[2 * hist..]);
        for h in 0..hist {
            let (c0, c1) = (self.theta[h], self.theta[hist + h]);
            let x = window.row(h);
            for (y, &xi) in out.iter_mut().zip(x) {
                *y += c0 * xi;
            }
            for &(i, j, a) in &self.norm_adj {
                out[i] += c1 * a * x[j];
            }
        }
    }

    fn vjp_acc(
        &self,
        window: &Matrix,
        cotangent: &[f64],
        grad_theta: &mut [f64],
        grad_input: &mut Matrix,
    ) {
        let hist = self.history;
        for h in 0..hist {
            let (c0, c1) = (self.theta[h], self.theta[hist + h]);
            let x = window.row(h);
            let mut g_c0 = 0.0;
            let mut g_c1 = 0.0;
            {
                let gx = grad_input.row_mut(h);
                for i in 0..self.sensors {
                    g_c0 += cotangent[i] * x[i];
                    gx[i] += c0 * cotangent[i];
                }
                for &(i, j, a) in &self.norm_adj {
                    g_c1 += cotangent[i] * a * x[j];
                    gx[j] += c1 * a * cotangent[i];
                }
            }
            grad_theta[h] += g_c0;
            grad_theta[hist + h] += g_c1;
        }
        for (g, &c) in grad_theta[2 * hist..].iter_mut().zip(cotangent) {
            *g += c;
        }
    }
}
