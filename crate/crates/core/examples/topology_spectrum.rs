//! Builds each topology family and prints the two ends of its Laplacian
//! spectrum. `λ_max` sets the smoothness of the dual; the algebraic
//! connectivity `λ_2` governs how fast consensus can spread.
//!
//! `cargo run --example topology_spectrum -- 30`

use async_barycenter::topology::{build_topology, laplacian, SpectralInfo, TopologyKind, TopologySpec};
use nalgebra::SymmetricEigen;

fn main() -> async_barycenter::Result<()> {
    let m: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let specs = [
        TopologySpec::new(TopologyKind::Complete, m),
        TopologySpec::new(TopologyKind::Cycle, m),
        TopologySpec::new(TopologyKind::Star, m),
        TopologySpec::erdos_renyi(m, 0.2, 7),
    ];
    println!("{:<12} {:>6} {:>10} {:>10}", "topology", "edges", "lambda_2", "lambda_max");
    for spec in &specs {
        let graph = build_topology(spec)?;
        let lap = laplacian(&graph);
        let info = SpectralInfo::compute(&lap)?;
        let mut eig: Vec<f64> = SymmetricEigen::new(lap.matrix().clone()).eigenvalues.iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        println!(
            "{:<12} {:>6} {:>10.4} {:>10.4}",
            spec.kind.as_str(),
            graph.num_edges(),
            eig[1],
            info.lambda_max
        );
    }
    Ok(())
}
