//! Property tests for graphs, windowing, splitting, normalization and the
//! zero-payload reduction.

use proptest::prelude::*;
use saea_core::adjust::{saea_loss, saea_predict, ErrorKind, ErrorModel, RegularizerConfig};
use saea_core::data::{
    chronological_split, make_windows, split_sizes, NormalizeMode, Normalizer, SeriesFrame,
};
use saea_core::forecaster::{AnyModel, Forecaster, ModelKind};
use saea_core::graph::{normalized_laplacian, structural_mask, SensorGraph};
use saea_core::synth::bfs_mask_oracle;
use saea_core::Matrix;

fn frame_strategy() -> impl Strategy<Value = SeriesFrame> {
    (1usize..5, 8usize..40).prop_flat_map(|(n, t)| {
        prop::collection::vec(-100.0f64..100.0, n * t)
            .prop_map(move |v| SeriesFrame::new(Matrix::from_vec(t, n, v).unwrap(), 5.0).unwrap())
    })
}

proptest! {
    #[test]
    fn mask_matches_bfs(n in 1usize..30, p in 0.0f64..0.4, seed in any::<u64>(), order in 1usize..=2) {
        let g = SensorGraph::erdos_renyi(n, p, seed);
        let mask = structural_mask(&g, order).unwrap();
        prop_assert_eq!(mask.matrix(), &bfs_mask_oracle(&g, order));
    }

    #[test]
    fn laplacian_symmetric_for_symmetric_graphs(n in 1usize..20, p in 0.0f64..1.0, seed in any::<u64>()) {
        let g = SensorGraph::erdos_renyi(n, p, seed);
        prop_assert!(normalized_laplacian(&g).is_symmetric(1e-15));
        prop_assert!(structural_mask(&g, 1).unwrap().matrix().is_symmetric(0.0));
    }

    #[test]
    fn windows_follow_index_rules(frame in frame_strategy(), h in 2usize..5, p in 0usize..3) {
        prop_assume!(frame.len() > h + p);
        let ws = make_windows(&frame, h, p).unwrap();
        prop_assert_eq!(ws.len(), frame.len() - h - p);
        for b in 0..ws.len() {
            let t = h + b;
            let w = &ws.inputs[b];
            for r in 0..h {
                prop_assert_eq!(w.row(r), frame.row(t - 1 - r));
            }
            for r in 0..h - 1 {
                prop_assert_eq!(ws.inputs_shifted[b].row(r), w.row(r + 1));
            }
            prop_assert_eq!(ws.inputs_shifted[b].row(h - 1), &w.col_means()[..]);
            prop_assert_eq!(ws.anchors.row(b), w.row(0));
            prop_assert_eq!(ws.targets.row(b), frame.row(t + p));
        }
    }

    #[test]
    fn split_is_contiguous_partition(t in 10usize..500, tf in 0.3f64..0.8, vf in 0.05f64..0.15) {
        if let Ok((a, b, c)) = split_sizes(t, tf, vf) {
            prop_assert_eq!(a + b + c, t);
            let m = Matrix::from_vec(t, 1, (0..t).map(|i| i as f64).collect()).unwrap();
            let frame = SeriesFrame::new(m, 5.0).unwrap();
            let (tr, va, te) = chronological_split(&frame, tf, vf).unwrap();
            prop_assert_eq!(tr.len(), a);
            prop_assert_eq!(va.row(0)[0], a as f64);
            prop_assert_eq!(te.row(0)[0], (a + b) as f64);
            prop_assert_eq!(te.start_index(), a + b);
        }
    }

    #[test]
    fn normalizer_round_trips(frame in frame_strategy()) {
        let norm = Normalizer::fit(&frame, NormalizeMode::Zscore);
        let back = norm.inverse(&norm.transform(&frame));
        let diff = back.values().max_abs_diff(frame.values()).unwrap();
        prop_assert!(diff <= 1e-9 * (1.0 + frame.values().max_abs()));
    }

    #[test]
    fn zero_payload_reduces_to_base(seed in any::<u64>(), n in 2usize..=8, h in 2usize..=6, kind_idx in 0usize..6, order in 1usize..=2) {
        let kind = ErrorKind::ALL[kind_idx];
        let graph = SensorGraph::erdos_renyi(n, 0.5, seed);
        let mut rng = saea_core::rng::SeededRng::new(seed ^ 1);
        let t = h + 6;
        let frame = SeriesFrame::new(Matrix::from_vec(t, n, (0..t * n).map(|_| rng.normal()).collect()).unwrap(), 5.0).unwrap();
        let ws = make_windows(&frame, h, 0).unwrap();
        let model = AnyModel::new(ModelKind::GraphFilterAr, h, n, Some(&graph), 0, seed).unwrap();
        let cfg = RegularizerConfig::defaults_for(kind, n);
        let mut em = ErrorModel::zeros(kind, order, n, cfg.rank).unwrap();
        if kind == ErrorKind::Structural {
            em = em.with_mask(structural_mask(&graph, 1).unwrap()).unwrap();
        }
        let eval = saea_loss(&model, &em, &cfg, &ws).unwrap();
        let mut mse = 0.0;
        for b in 0..ws.len() {
            let base = model.forward(&ws.inputs[b]).unwrap();
            let adj = saea_predict(&model, &em, &ws.inputs[b], &[&ws.inputs_shifted[b], &ws.inputs_shifted2[b]]).unwrap();
            for (x, y) in base.iter().zip(&adj) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
            for (x, y) in base.iter().zip(ws.targets.row(b)) {
                mse += (x - y) * (x - y);
            }
        }
        mse /= (ws.len() * n) as f64;
        prop_assert!((eval.loss - mse).abs() <= 1e-12 * mse.max(1e-300));
    }

    #[test]
    fn linear_models_are_affine(seed in any::<u64>(), a in -3.0f64..3.0) {
        let graph = SensorGraph::ring(4);
        let mut rng = saea_core::rng::SeededRng::new(seed);
        let x = Matrix::from_vec(3, 4, (0..12).map(|_| rng.normal()).collect()).unwrap();
        let y = Matrix::from_vec(3, 4, (0..12).map(|_| rng.normal()).collect()).unwrap();
        for kind in [ModelKind::NodeAr, ModelKind::GraphFilterAr] {
            let m = AnyModel::new(kind, 3, 4, Some(&graph), 0, seed).unwrap();
            // f(a x + (1 - a) y) = a f(x) + (1 - a) f(y) for affine f.
            let mix = x.scale(a).add(&y.scale(1.0 - a)).unwrap();
            let lhs = m.forward(&mix).unwrap();
            let fx = m.forward(&x).unwrap();
            let fy = m.forward(&y).unwrap();
            for i in 0..4 {
                let rhs = a * fx[i] + (1.0 - a) * fy[i];
                prop_assert!((lhs[i] - rhs).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn er_graph_mask_oracle_fixed_cases() {
    for seed in 0..50u64 {
        for p in [0.05, 0.2] {
            let g = SensorGraph::erdos_renyi(50, p, seed);
            for order in 1..=2 {
                assert_eq!(
                    structural_mask(&g, order).unwrap().matrix(),
                    &bfs_mask_oracle(&g, order)
                );
            }
        }
    }
}

#[test]
fn seeded_construction_is_deterministic() {
    let g = SensorGraph::ring(6);
    for kind in [ModelKind::NodeAr, ModelKind::GraphFilterAr, ModelKind::Mlp] {
        let a = AnyModel::new(kind, 4, 6, Some(&g), 8, 42).unwrap();
        let b = AnyModel::new(kind, 4, 6, Some(&g), 8, 42).unwrap();
        let c = AnyModel::new(kind, 4, 6, Some(&g), 8, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.params(), c.params());
    }
}
