//! IDX round trip and a short barycenter run over images of one digit.
//!
//! Real MNIST files can be fed through `barycenter mnist-prepare`; this
//! example writes synthetic IDX files so it runs offline.

use async_barycenter::mnist::{
    labels_to_bytes, parse_idx_images, parse_idx_labels, pixel_grid, prepare_manifest, synthetic_digits,
};
use async_barycenter::sim::{
    run_sim, ActivationMode, AlgorithmVariant, BatchRule, CommModel, EvalConfig, NodeObjective, SimConfig,
};
use async_barycenter::topology::{build_topology, lambda_max, laplacian, TopologyKind, TopologySpec};
use async_barycenter::transport::RegularizationConfig;

fn main() -> async_barycenter::Result<()> {
    let dir = tempfile_dir()?;
    let (images, labels) = synthetic_digits(200, 1);
    let image_path = dir.join("images.idx");
    let label_path = dir.join("labels.idx");
    std::fs::write(&image_path, images.to_bytes())?;
    std::fs::write(&label_path, labels_to_bytes(&labels))?;

    let images = parse_idx_images(&std::fs::read(&image_path)?)?;
    let labels = parse_idx_labels(&std::fs::read(&label_path)?)?;
    let m = 10;
    let manifest = prepare_manifest(&images, &labels, 3, m, 0, true)?;
    println!("selected images {:?}", manifest.indices);

    let beta = 0.01;
    let graph = build_topology(&TopologySpec::new(TopologyKind::Complete, m))?;
    let objective = NodeObjective::Transport {
        measures: manifest.measures.iter().map(|p| p.to_measure()).collect::<Result<_, _>>()?,
        grid: pixel_grid(manifest.rows, manifest.cols)?,
        reg: RegularizationConfig::new(beta)?,
    };
    let cfg = SimConfig {
        variant: AlgorithmVariant::A2dwb,
        horizon_s: 20.0,
        activation_mode: ActivationMode::Permutation,
        interval_s: 0.2 / m as f64,
        comm: CommModel::default(),
        master_seed: 0,
        gamma: 0.1 * beta / lambda_max(&laplacian(&graph), 1e-12)?,
        batch: BatchRule::Fixed(10),
        eval: EvalConfig { every_s: 5.0, samples: 100, seed: 0 },
        topology_label: "complete".into(),
    };
    let out = run_sim(&graph, &objective, &cfg)?;
    for row in &out.trace.rows {
        println!(
            "t = {:>5.1}  dual {:>10.5}  consensus {:.4e}",
            row.virtual_time_s, row.dual_objective, row.consensus_distance
        );
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

fn tempfile_dir() -> std::io::Result<std::path::PathBuf> {
    let dir = std::env::temp_dir().join(format!("barycenter-mnist-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}
