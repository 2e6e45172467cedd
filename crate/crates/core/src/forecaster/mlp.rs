use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{init_uniform, Forecaster, ModelKind};
use crate::linalg::Matrix;
use crate::math;
use crate::rng::SeededRng;

/// `y = W2 tanh(W1 x + b1) + b2` over the row-major flattened window.
///
/// Parameter layout: `W1` (`hidden x HN`, row-major), `b1`, `W2`
/// (`N x hidden`), `b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    history: usize,
    sensors: usize,
    hidden: usize,
    theta: Vec<f64>,
}

impl Mlp {
    /// Seeded uniform weights, zero biases.
    pub fn new(history: usize, sensors: usize, hidden: usize, seed: u64) -> Self {
        let inputs = history * sensors;
        let mut theta = vec![0.0; hidden * inputs + hidden + sensors * hidden + sensors];
        let mut rng = SeededRng::new(seed);
        let w1_end = hidden * inputs;
        init_uniform(&mut rng, inputs, &mut theta[..w1_end]);
        let w2_start = w1_end + hidden;
        init_uniform(
            &mut rng,
            hidden,
            &mut theta[w2_start..w2_start + sensors * hidden],
        );
        Self {
            history,
            sensors,
            hidden,
            theta,
        }
    }

    /// Hidden width.
    pub fn hidden(&self) -> usize {
        self.hidden
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        let inputs = self.history * self.sensors;
        let (w1, rest) = self.theta.split_at(self.hidden * inputs);
        let (b1, rest) = rest.split_at(self.hidden);
        let (w2, b2) = rest.split_at(self.sensors * self.hidden);
        (w1, b1, w2, b2)
    }

    fn hidden_activations(&self, x: &[f64]) -> Vec<f64> {
        let inputs = x.len();
        let (w1, b1, _, _) = self.split();
        (0..self.hidden)
            .map(|k| math::tanh(b1[k] + crate::linalg::dot(&w1[k * inputs..(k + 1) * inputs], x)))
            .collect()
    }
}

impl Forecaster for Mlp {
    fn kind(&self) -> ModelKind {
        ModelKind::Mlp
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
        let a = self.hidden_activations(window.as_slice());
        let (_, _, w2, b2) = self.split();
        for (i, y) in out.iter_mut().enumerate() {
            *y = b2[i] + crate::linalg::dot(&w2[i * self.hidden..(i + 1) * self.hidden], &a);
        }
    }

    fn vjp_acc(
        &self,
        window: &Matrix,
        cotangent: &[f64],
        grad_theta: &mut [f64],
        grad_input: &mut Matrix,
    ) {
        let x = window.as_slice();
        let inputs = x.len();
        let hid = self.hidden;
        let a = self.hidden_activations(x);
        let (w1, _, w2, _) = self.split();

        let w1_len = hid * inputs;
        let w2_start = w1_len + hid;
        let b2_start = w2_start + self.sensors * hid;

        // dz_k = (1 - a_k^2) * sum_i g_i W2_{ik}
        let mut dz = vec![0.0; hid];
        for (i, &g) in cotangent.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad_theta[b2_start + i] += g;
            let row = &w2[i * hid..(i + 1) * hid];
            let grow = &mut grad_theta[w2_start + i * hid..w2_start + (i + 1) * hid];
            for k in 0..hid {
                grow[k] += g * a[k];
                dz[k] += g * row[k];
            }
        }
        let gx = grad_input.as_mut_slice();
        for k in 0..hid {
            let d = dz[k] * (1.0 - a[k] * a[k]);
            if d == 0.0 {
                continue;
            }
            grad_theta[w1_len + k] += d;
            let wrow = &w1[k * inputs..(k + 1) * inputs];
            let grow = &mut grad_theta[k * inputs..(k + 1) * inputs];
            for j in 0..inputs {
                grow[j] += d * x[j];
                gx[j] += d * wrow[j];
            }
        }
    }
}
