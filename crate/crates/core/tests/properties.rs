//! Property tests for the invariants that hold for every input.

use std::rc::Rc;

use proptest::prelude::*;

use async_barycenter::blocks::Blocks;
use async_barycenter::config::{preset, PresetKind, RunConfig};
use async_barycenter::experiments::{consensus_distance, project_to_range};
use async_barycenter::mnist::{image_to_measure, parse_idx_images, IdxImages};
use async_barycenter::optimizer::{batch_size, pasbcds_step, step_size, DelaySchedule, PasbcdsState, ThetaSchedule};
use async_barycenter::sim::{
    ActivationMode, ActivationSchedule, CommModel, EventKind, EventQueue, Message, SimTime,
};
use async_barycenter::topology::{build_topology, laplacian_apply, TopologyKind, TopologySpec};
use async_barycenter::transport::softmax_primal;

fn kind() -> impl Strategy<Value = TopologyKind> {
    prop_oneof![
        Just(TopologyKind::Complete),
        Just(TopologyKind::Cycle),
        Just(TopologyKind::Star),
        Just(TopologyKind::ErdosRenyi),
    ]
}

fn spec(kind: TopologyKind, m: usize, seed: u64) -> TopologySpec {
    match kind {
        TopologyKind::ErdosRenyi => TopologySpec::erdos_renyi(m, 0.5, seed),
        k => TopologySpec::new(k, m),
    }
}

fn blocks(m: usize, n: usize, values: &[f64]) -> Blocks {
    let rows: Vec<Vec<f64>> = values.chunks(n).take(m).map(<[f64]>::to_vec).collect();
    Blocks::from_rows(&rows).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn theta_stays_inside_bounds(m in 1usize..600, k in 1usize..20_000) {
        let mut s = ThetaSchedule::new(m);
        let t = s.theta(k);
        let d = (k - 1 + 2 * m) as f64;
        prop_assert!(t >= 1.0 / d * (1.0 - 1e-12));
        prop_assert!(t <= 2.0 / d * (1.0 + 1e-12));
        let next = s.theta(k + 1);
        prop_assert!(next < t);
        let rel = ((1.0 - next) / (next * next) * t * t - 1.0).abs();
        prop_assert!(rel < 1e-10);
    }

    #[test]
    fn step_size_meets_its_condition(l in 1e-3f64..1e3, m in 1usize..50, frac in 0.0f64..=1.0) {
        let tau = (frac * m as f64).floor() as usize;
        let g = step_size(l, tau, m).unwrap();
        let t = tau as f64;
        let s = (t * t + t) / m as f64 + 2.0 * t;
        let lhs = 3.0 * l * g + 12.0 * l * g * s * s;
        prop_assert!((lhs - 1.0).abs() < 1e-12);
        prop_assert!(step_size(l, m + 1, m).is_err());
    }

    #[test]
    fn batch_size_is_monotone(k in 0usize..10_000, m in 1usize..50, sigma2 in 0.0f64..10.0) {
        let a = batch_size(k, m, sigma2, 0.1, 2.0).unwrap();
        let b = batch_size(k + 1, m, sigma2, 0.1, 2.0).unwrap();
        prop_assert!(a >= 1 && b >= a);
    }

    #[test]
    fn delay_schedules_stay_in_window(m in 1usize..8, tau in 0usize..6, len in 1usize..60, seed in any::<u64>()) {
        let d = DelaySchedule::uniform(m, tau, len, seed);
        for k in 0..len {
            for p in 0..m {
                let j = d.read_index(p, k).unwrap();
                prop_assert!(j <= k && k - j <= tau);
                if k > 0 {
                    prop_assert!(j >= d.read_index(p, k - 1).unwrap());
                }
            }
        }
    }

    #[test]
    fn practical_step_touches_one_block(
        m in 1usize..6,
        steps in 1usize..20,
        block_seed in any::<u64>(),
        values in prop::collection::vec(-3.0f64..3.0, 60),
    ) {
        let n = 2;
        let mut state = PasbcdsState::new(Blocks::zeros(m, n));
        let mut thetas = ThetaSchedule::new(m);
        for s in 0..steps {
            let block = ((block_seed >> (s % 60)) as usize) % m;
            let before_u = state.u().clone();
            let before_v = state.v().clone();
            let g = &values[(2 * s) % 58..(2 * s) % 58 + n];
            pasbcds_step(&mut state, &mut thetas, block, g, 0.1);
            for p in (0..m).filter(|&p| p != block) {
                prop_assert_eq!(state.u().block(p), before_u.block(p));
                prop_assert_eq!(state.v().block(p), before_v.block(p));
            }
        }
    }

    #[test]
    fn consensus_vanishes_on_constant_blocks(kind in kind(), m in 2usize..12, row in prop::collection::vec(-5.0f64..5.0, 3)) {
        let g = build_topology(&spec(kind, m, 1)).unwrap();
        let x = Blocks::from_rows(&vec![row; m]).unwrap();
        prop_assert_eq!(consensus_distance(&g, &x).unwrap(), 0.0);
        prop_assert!(laplacian_apply(&g, &x).norm_sq() < 1e-24);
    }

    #[test]
    fn consensus_matches_laplacian_form(kind in kind(), m in 2usize..10, seed in 0u64..50, values in prop::collection::vec(-2.0f64..2.0, 20)) {
        let g = build_topology(&spec(kind, m, seed)).unwrap();
        let x = blocks(m, 2, &values);
        // Σ_edges ‖x_i − x_j‖² = ⟨x, (W ⊗ I) x⟩.
        let quad = x.dot(&laplacian_apply(&g, &x));
        let c = consensus_distance(&g, &x).unwrap();
        prop_assert!((quad - c).abs() <= 1e-10 * c.max(1.0));
    }

    #[test]
    fn projection_removes_the_mean(m in 1usize..10, values in prop::collection::vec(-10.0f64..10.0, 30)) {
        let x = blocks(m, 3, &values);
        let p = project_to_range(&x);
        for l in 0..3 {
            let s: f64 = (0..m).map(|i| p.block(i)[l]).sum();
            prop_assert!(s.abs() < 1e-12);
        }
        let again = project_to_range(&p);
        prop_assert!(again.max_rel_diff(&p, 1e-12) < 1e-12);
    }

    #[test]
    fn softmax_is_a_distribution(
        eta in prop::collection::vec(-50.0f64..50.0, 1..12),
        beta in 1e-3f64..10.0,
        shift in -100.0f64..100.0,
    ) {
        let costs: Vec<f64> = (0..eta.len()).map(|l| (l as f64 * 0.37).sin().abs()).collect();
        let p = softmax_primal(&eta, &costs, beta).unwrap();
        prop_assert!(p.iter().all(|v| *v >= 0.0 && v.is_finite()));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // Adding a constant to η leaves the plan unchanged.
        let moved: Vec<f64> = eta.iter().map(|e| e + shift).collect();
        let q = softmax_primal(&moved, &costs, beta).unwrap();
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn event_queue_pops_in_order(events in prop::collection::vec((0u64..1000, any::<bool>(), 0usize..5), 1..80)) {
        let mut q = EventQueue::new();
        for &(t, deliver, node) in &events {
            let kind = if deliver {
                EventKind::Deliver(Message { from: node, to: (node + 1) % 5, sent: SimTime::ZERO, gradient: Rc::from(vec![0.0]) })
            } else {
                EventKind::Activate { node }
            };
            q.push(SimTime(t), kind);
        }
        let mut last: Option<(SimTime, u8)> = None;
        while let Some(e) = q.pop() {
            let rank = match e.kind { EventKind::Deliver(_) => 0u8, EventKind::Activate { .. } => 1 };
            if let Some(prev) = last {
                prop_assert!(prev <= (e.time, rank));
            }
            last = Some((e.time, rank));
        }
    }

    #[test]
    fn permutation_covers_each_node_once_per_sweep(m in 1usize..20, seed in any::<u64>(), sweeps in 1u64..4) {
        let mut s = ActivationSchedule::new(ActivationMode::Permutation, m, 0.2, seed).unwrap();
        for sweep in 0..sweeps {
            let mut seen: Vec<usize> = (0..m as u64).map(|i| s.node(sweep * m as u64 + i)).collect();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..m).collect::<Vec<_>>());
        }
    }

    #[test]
    fn delays_come_from_the_support(seed in any::<u64>(), a in any::<u64>(), b in any::<u64>()) {
        let comm = CommModel::default();
        let d = comm.sample_delay(seed, a, b);
        prop_assert!(comm.support.contains(&d));
        prop_assert_eq!(d, comm.sample_delay(seed, a, b));
    }

    #[test]
    fn config_round_trips(m in 2usize..30, kind in kind(), which in 0usize..3, seed in any::<u64>(), horizon in 0.0f64..1e4) {
        let preset_kind = [PresetKind::Gaussian, PresetKind::Quadratic, PresetKind::Mnist][which];
        let mut c = preset(preset_kind, spec(kind, m, seed % 1000)).unwrap();
        c.sim.master_seed = seed;
        c.sim.horizon_s = horizon;
        let text = c.to_json();
        let back = RunConfig::from_json(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.to_json(), text);
    }

    #[test]
    fn idx_images_round_trip(rows in 1usize..6, cols in 1usize..6, count in 1usize..5, pixels in prop::collection::vec(any::<u8>(), 150)) {
        let img = IdxImages::new(rows, cols, pixels[..rows * cols * count].to_vec()).unwrap();
        let parsed = parse_idx_images(&img.to_bytes()).unwrap();
        prop_assert_eq!(&parsed, &img);
        for i in 0..count {
            match image_to_measure(img.image(i), rows, cols, true) {
                Ok(m) => prop_assert!((m.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12),
                Err(_) => prop_assert!(img.image(i).iter().all(|&p| p == 0)),
            }
        }
    }
}
