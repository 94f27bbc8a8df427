//! Barycenter of twenty Gaussians with all three variants on two topologies.
//! Writes one trace CSV per run into the given directory.
//!
//! `cargo run --release --example gaussian_barycenter -- traces 0`

use std::path::PathBuf;

use async_barycenter::experiments::{emit_csv, gaussian_preset};
use async_barycenter::sim::{run_sim, ActivationMode, AlgorithmVariant, BatchRule, CommModel, EvalConfig, SimConfig};
use async_barycenter::topology::{build_topology, lambda_max, laplacian, TopologyKind, TopologySpec};

fn main() -> async_barycenter::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "traces".into()));
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    std::fs::create_dir_all(&dir)?;

    let (m, beta) = (20, 1.0);
    let preset = gaussian_preset(m, 50, seed)?;
    let objective = preset.objective(beta)?;
    for kind in [TopologyKind::Cycle, TopologyKind::Complete] {
        let graph = build_topology(&TopologySpec::new(kind, m))?;
        let gamma = 0.1 * beta / lambda_max(&laplacian(&graph), 1e-12)?;
        for variant in AlgorithmVariant::ALL {
            let cfg = SimConfig {
                variant,
                horizon_s: 200.0,
                activation_mode: ActivationMode::Permutation,
                // Each node wakes once per 0.2 s on average.
                interval_s: 0.2 / m as f64,
                comm: CommModel::default(),
                master_seed: seed,
                gamma,
                batch: BatchRule::Fixed(10),
                eval: EvalConfig::default(),
                topology_label: kind.as_str().into(),
            };
            let out = run_sim(&graph, &objective, &cfg)?;
            let path = dir.join(format!("{}_{}_seed{seed}.csv", kind.as_str(), variant.as_str()));
            emit_csv(&out.trace, &path)?;
            let (first, last) = (out.trace.first().expect("snapshots"), out.trace.last().expect("snapshots"));
            println!(
                "{:<9} {:<14} dual {:>9.3} -> {:>9.3}   consensus {:.3e} -> {:.3e}",
                kind.as_str(),
                variant.as_str(),
                first.dual_objective,
                last.dual_objective,
                first.consensus_distance,
                last.consensus_distance
            );
        }
    }
    println!("traces in {}", dir.display());
    Ok(())
}
