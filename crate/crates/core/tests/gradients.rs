//! Analytic gradients against central finite differences.

use saea_core::adjust::{saea_loss, ErrorKind, ErrorModel, RegularizerConfig};
use saea_core::data::{make_windows, SeriesFrame, WindowSet};
use saea_core::forecaster::{AnyModel, Forecaster, ModelKind};
use saea_core::graph::{structural_mask, SensorGraph};
use saea_core::rng::SeededRng;
use saea_core::Matrix;

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn random_windows(n: usize, h: usize, t: usize, seed: u64) -> WindowSet {
    let mut rng = SeededRng::new(seed);
    let data: Vec<f64> = (0..t * n).map(|_| rng.normal()).collect();
    let frame = SeriesFrame::new(Matrix::from_vec(t, n, data).unwrap(), 5.0).unwrap();
    make_windows(&frame, h, 0).unwrap()
}

/// Payload entries drawn from `+/-[0.1, 0.4]`, away from every kink.
fn random_payload(em: &mut ErrorModel, seed: u64) {
    let mut rng = SeededRng::new(seed);
    for v in em.params_mut() {
        *v = rng.sign() * rng.uniform_range(0.1, 0.4);
    }
}

/// The data term and the penalty are differenced separately: with large
/// `alpha` the penalty dominates the loss and would swamp the rounding
/// budget of the data term's difference.
fn parts(model: &AnyModel, em: &ErrorModel, cfg: &RegularizerConfig, ws: &WindowSet) -> (f64, f64) {
    let e = saea_loss(model, em, cfg, ws).unwrap();
    (e.mse, e.penalty)
}

fn central(up: (f64, f64), down: (f64, f64)) -> f64 {
    (up.0 - down.0) / (2.0 * STEP) + (up.1 - down.1) / (2.0 * STEP)
}

fn check(model: &AnyModel, em: &ErrorModel, cfg: &RegularizerConfig, ws: &WindowSet, label: &str) {
    let eval = saea_loss(model, em, cfg, ws).unwrap();
    let mut worst: f64 = 0.0;
    let mut m = model.clone();
    for i in 0..m.num_params() {
        let x = m.params()[i];
        m.params_mut()[i] = x + STEP;
        let up = parts(&m, em, cfg, ws);
        m.params_mut()[i] = x - STEP;
        let down = parts(&m, em, cfg, ws);
        m.params_mut()[i] = x;
        worst = worst.max(rel_err(eval.grad_theta[i], central(up, down)));
    }
    let mut e = em.clone();
    for i in 0..e.params().len() {
        let x = e.params()[i];
        e.params_mut()[i] = x + STEP;
        let up = parts(model, &e, cfg, ws);
        e.params_mut()[i] = x - STEP;
        let down = parts(model, &e, cfg, ws);
        e.params_mut()[i] = x;
        worst = worst.max(rel_err(eval.grad_payload[i], central(up, down)));
    }
    assert!(worst < TOL, "{label}: worst relative error {worst:e}");
}

fn error_model(
    kind: ErrorKind,
    order: usize,
    graph: &SensorGraph,
    rank: usize,
    seed: u64,
) -> ErrorModel {
    let n = graph.n();
    let mut em = ErrorModel::zeros(kind, order, n, rank).unwrap();
    if kind == ErrorKind::Structural {
        em = em.with_mask(structural_mask(graph, 1).unwrap()).unwrap();
    }
    random_payload(&mut em, seed);
    em
}

#[test]
fn all_kinds_orders_and_models() {
    let n = 5;
    let h = 4;
    let graph = SensorGraph::ring(n);
    let ws = random_windows(n, h, 16, 1);
    for (mi, mk) in [ModelKind::NodeAr, ModelKind::GraphFilterAr, ModelKind::Mlp]
        .into_iter()
        .enumerate()
    {
        let model = AnyModel::new(mk, h, n, Some(&graph), 6, 10 + mi as u64).unwrap();
        for kind in ErrorKind::ALL {
            for order in 1..=2 {
                let cfg = RegularizerConfig::defaults_for(kind, 2);
                let em = error_model(kind, order, &graph, cfg.rank, 7 * order as u64);
                check(
                    &model,
                    &em,
                    &cfg,
                    &ws,
                    &format!("{} {} VAR({order})", mk.name(), kind.name()),
                );
            }
        }
    }
}

#[test]
fn spec_sized_instance() {
    // N = 4, H = 3, B = 8.
    let graph = SensorGraph::path(4);
    let ws = random_windows(4, 3, 11, 3);
    assert_eq!(ws.len(), 8);
    let model = AnyModel::new(ModelKind::NodeAr, 3, 4, None, 0, 5).unwrap();
    let cfg = RegularizerConfig::defaults_for(ErrorKind::SparseFull, 4);
    let em = error_model(ErrorKind::SparseFull, 1, &graph, 0, 2);
    check(&model, &em, &cfg, &ws, "sparse_full N=4");
}

#[test]
fn squared_structural_penalty() {
    let graph = SensorGraph::path(5);
    let ws = random_windows(5, 4, 14, 4);
    let model = AnyModel::new(ModelKind::GraphFilterAr, 4, 5, Some(&graph), 0, 2).unwrap();
    let mut cfg = RegularizerConfig::defaults_for(ErrorKind::Structural, 5);
    cfg.squared_structural_penalty = true;
    let em = error_model(ErrorKind::Structural, 2, &graph, 0, 9);
    check(&model, &em, &cfg, &ws, "structural squared");
}

#[test]
fn unregularized_gradients() {
    let graph = SensorGraph::ring(5);
    let ws = random_windows(5, 4, 14, 8);
    let model = AnyModel::new(ModelKind::Mlp, 4, 5, None, 8, 3).unwrap();
    for kind in ErrorKind::ALL {
        let mut cfg = RegularizerConfig::none();
        cfg.rank = 3;
        let em = error_model(kind, 2, &graph, 3, 12);
        check(&model, &em, &cfg, &ws, kind.name());
    }
}

#[test]
fn forecaster_input_vjp_matches_fd() {
    let graph = SensorGraph::ring(5);
    let mut rng = SeededRng::new(6);
    let window = Matrix::from_vec(4, 5, (0..20).map(|_| rng.normal()).collect()).unwrap();
    let cot: Vec<f64> = (0..5).map(|_| rng.normal()).collect();
    for mk in [ModelKind::NodeAr, ModelKind::GraphFilterAr, ModelKind::Mlp] {
        let model = AnyModel::new(mk, 4, 5, Some(&graph), 7, 1).unwrap();
        let vjp = model.vjp(&window, &cot).unwrap();
        let f = |w: &Matrix| -> f64 {
            let y = model.forward(w).unwrap();
            y.iter().zip(&cot).map(|(a, b)| a * b).sum()
        };
        for i in 0..20 {
            let mut up = window.clone();
            up.as_mut_slice()[i] += STEP;
            let mut down = window.clone();
            down.as_mut_slice()[i] -= STEP;
            let fd = (f(&up) - f(&down)) / (2.0 * STEP);
            let e = rel_err(vjp.grad_input.as_slice()[i], fd);
            assert!(e < TOL, "{} input {i}: {e:e}", mk.name());
        }
    }
}
