//! End-to-end simulator behaviour: replay determinism, consensus on
//! identical measures, and trace structure.

use async_barycenter::experiments::{gaussian_preset, identical_measures, quadratic_preset, write_csv, TRACE_COLUMNS};
use async_barycenter::sim::{
    run_sim, ActivationMode, AlgorithmVariant, BatchRule, CommModel, EvalConfig, NodeObjective, SimConfig, SimOutput,
};
use async_barycenter::topology::{build_topology, lambda_max, laplacian, Graph, TopologyKind, TopologySpec};
use async_barycenter::transport::{DiscreteMeasure, Measure, SupportGrid};

fn config(variant: AlgorithmVariant, horizon_s: f64, gamma: f64, batch: BatchRule, seed: u64) -> SimConfig {
    SimConfig {
        variant,
        horizon_s,
        activation_mode: ActivationMode::Permutation,
        interval_s: 0.2,
        comm: CommModel::default(),
        master_seed: seed,
        gamma,
        batch,
        eval: EvalConfig::default(),
        topology_label: "test".into(),
    }
}

fn csv_bytes(out: &SimOutput) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(&out.trace, &mut buf).unwrap();
    buf
}

fn graph(kind: TopologyKind, m: usize) -> Graph {
    build_topology(&TopologySpec::new(kind, m)).unwrap()
}

fn three_atoms() -> Measure {
    Measure::Discrete(DiscreteMeasure::new(&[vec![0.15], vec![0.5], vec![0.8]], vec![0.2, 0.5, 0.3]).unwrap())
}

/// Largest pairwise total-variation distance between node primal estimates.
fn max_tv(objective: &NodeObjective, out: &SimOutput, samples: usize) -> f64 {
    let p: Vec<Vec<f64>> = (0..objective.num_nodes())
        .map(|i| objective.primal(i, out.final_iterate.block(i), samples, 0).unwrap())
        .collect();
    let mut worst = 0.0f64;
    for a in &p {
        for b in &p {
            worst = worst.max(0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>());
        }
    }
    worst
}

#[test]
fn reruns_are_byte_identical_for_every_variant() {
    let g = graph(TopologyKind::Cycle, 6);
    let objective = gaussian_preset(6, 12, 3).unwrap().objective(0.5).unwrap();
    for variant in AlgorithmVariant::ALL {
        let cfg = config(variant, 30.0, 0.01, BatchRule::Fixed(3), 9);
        let a = run_sim(&g, &objective, &cfg).unwrap();
        let b = run_sim(&g, &objective, &cfg).unwrap();
        assert_eq!(csv_bytes(&a), csv_bytes(&b), "{}", variant.as_str());
        let c = run_sim(&g, &objective, &config(variant, 30.0, 0.01, BatchRule::Fixed(3), 10)).unwrap();
        assert_ne!(csv_bytes(&a), csv_bytes(&c), "seed must matter for {}", variant.as_str());
    }
}

#[test]
fn trace_has_schema_and_snapshot_grid() {
    let g = graph(TopologyKind::Star, 5);
    let objective = quadratic_preset(5, 2, 1.0, 0).unwrap().objective();
    let out = run_sim(&g, &objective, &config(AlgorithmVariant::A2dwb, 7.0, 0.05, BatchRule::Fixed(1), 0)).unwrap();
    let text = String::from_utf8(csv_bytes(&out)).unwrap();
    assert_eq!(text.lines().next().unwrap(), TRACE_COLUMNS.join(","));
    let times: Vec<f64> = out.trace.rows.iter().map(|r| r.virtual_time_s).collect();
    assert_eq!(times, vec![0.0, 2.0, 4.0, 6.0, 7.0]);
    assert!(out.trace.is_time_ordered());
    // 0.2 s ticks up to and including t = 7.0.
    assert_eq!(out.iterations, 35);
}

#[test]
fn two_identical_measures_reach_consensus() {
    let g = graph(TopologyKind::Complete, 2);
    let grid = SupportGrid::linspace(0.0, 1.0, 8).unwrap();
    let beta = 0.2;
    let objective = identical_measures(2, &three_atoms(), grid, beta).unwrap();
    // Sampling noise sets a consensus floor; a small step and a growing batch
    // push it well below the threshold.
    let gamma = 0.02 * beta / lambda_max(&laplacian(&g), 1e-12).unwrap();
    let cfg = config(AlgorithmVariant::A2dwb, 200.0, gamma, BatchRule::Schedule { epsilon: 0.03 }, 1);
    let out = run_sim(&g, &objective, &cfg).unwrap();
    let last = out.trace.last().unwrap();
    assert!(last.consensus_distance < 1e-6, "{}", last.consensus_distance);
}

#[test]
fn ten_identical_measures_agree() {
    let g = graph(TopologyKind::Cycle, 10);
    let grid = SupportGrid::linspace(0.0, 1.0, 8).unwrap();
    let beta = 0.2;
    let objective = identical_measures(10, &three_atoms(), grid, beta).unwrap();
    let gamma = 0.1 * beta / lambda_max(&laplacian(&g), 1e-12).unwrap();
    let cfg = config(AlgorithmVariant::A2dwb, 200.0, gamma, BatchRule::Schedule { epsilon: 0.1 }, 2);
    let out = run_sim(&g, &objective, &cfg).unwrap();
    let last = out.trace.last().unwrap();
    let tv = max_tv(&objective, &out, 200);
    assert!(last.consensus_distance < 1e-3, "{}", last.consensus_distance);
    assert!(tv < 1e-2, "{tv}");
}
