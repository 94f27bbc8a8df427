//! The reference and practical forms of accelerated block descent with stale
//! reads, driven by the same block choices, noise and read schedule.

use async_barycenter::blocks::Blocks;
use async_barycenter::optimizer::{
    run_asbcds, run_pasbcds, step_size, DelaySchedule, QuadraticConsensusProblem, RunOptions,
};
use async_barycenter::topology::{build_topology, TopologySpec};

fn main() -> async_barycenter::Result<()> {
    let (m, n, tau, iterations) = (8, 4, 3, 300);
    let graph = build_topology(&TopologySpec::erdos_renyi(m, 0.5, 3))?;
    let problem = QuadraticConsensusProblem::random(graph, 1.0, n, 3)?;
    let gamma = step_size(problem.smoothness(), tau, m)?;
    let delays = DelaySchedule::uniform(m, tau, iterations + 1, 5);
    let mut opts = RunOptions::new(iterations, gamma, 5);
    opts.record_iterates = true;
    opts.record_values = true;
    let oracle = problem.noisy_oracle(0.1, 5);
    let init = Blocks::zeros(m, n);

    let reference = run_asbcds(&oracle, &delays, &opts, &init)?;
    let practical = run_pasbcds(&oracle, &delays, &opts, &init)?;
    let deviation = reference
        .iterates
        .iter()
        .zip(&practical.iterates)
        .map(|(a, b)| a.max_rel_diff(b, 1e-12))
        .fold(0.0, f64::max);
    println!("gamma = {gamma:.3e}, max relative deviation between forms = {deviation:.2e}");

    let star = problem.optimal_value();
    for r in practical.records.iter().step_by(50) {
        println!(
            "k = {:>3}  block {}  staleness {}  gap {:.4e}",
            r.k,
            r.block,
            r.max_staleness,
            r.value.unwrap_or(f64::NAN) - star
        );
    }
    Ok(())
}
