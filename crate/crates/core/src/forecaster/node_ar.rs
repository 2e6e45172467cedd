use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{init_uniform, Forecaster, ModelKind};
use crate::linalg::Matrix;
use crate::rng::SeededRng;

/// Independent linear AR per sensor: `y_i = sum_h w_{i,h} x_{h,i} + b_i`.
///
/// Parameters are laid out sensor by sensor as `[w_{i,0}, ..., w_{i,H-1}, b_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeAr {
    history: usize,
    sensors: usize,
    theta: Vec<f64>,
}

impl NodeAr {
    /// Seeded uniform initialization, zero biases.
    pub fn new(history: usize, sensors: usize, seed: u64) -> Self {
        let mut theta = vec![0.0; sensors * (history + 1)];
        let mut rng = SeededRng::new(seed);
        for i in 0..sensors {
            let block = &mut theta[i * (history + 1)..i * (history + 1) + history];
            init_uniform(&mut rng, history, block);
        }
        Self {
            history,
            sensors,
            theta,
        }
    }

    /// All-zero parameters.
    pub fn zeros(history: usize, sensors: usize) -> Self {
        Self {
            history,
            sensors,
            theta: vec![0.0; sensors * (history + 1)],
        }
    }

    /// Weight of sensor `i` on lag `h`.
    pub fn weight_mut(&mut self, i: usize, h: usize) -> &mut f64 {
        &mut self.theta[i * (self.history + 1) + h]
    }

    /// Bias of sensor `i`.
    pub fn bias_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.theta[i * (self.history + 1) + self.history]
    }
}

impl Forecaster for NodeAr {
    fn kind(&self) -> ModelKind {
        ModelKind::NodeAr
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
        let stride = self.history + 1;
        for (i, y) in out.iter_mut().enumerate() {
            let p = &self.theta[i * stride..(i + 1) * stride];
            let mut acc = p[self.history];
            for h in 0..self.history {
                acc += p[h] * window[(h, i)];
            }
            *y = acc;
        }
    }

    fn vjp_acc(
        &self,
        window: &Matrix,
        cotangent: &[f64],
        grad_theta: &mut [f64],
        grad_input: &mut Matrix,
    ) {
        let stride = self.history + 1;
        for (i, &g) in cotangent.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let base = i * stride;
            for h in 0..self.history {
                grad_theta[base + h] += g * window[(h, i)];
                grad_input[(h, i)] += g * self.theta[base + h];
            }
            grad_theta[base + self.history] += g;
        }
    }
}
