//! Invariant suites run by `barycenter diagnostics`.
//!
//! Every suite is deterministic: all randomness comes from keyed streams in
//! the [`Domain::Test`] domain.

use std::fmt;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::blocks::Blocks;
use crate::error::Result;
use crate::experiments;
use crate::optimizer::{
    run_asbcds, run_pasbcds, step_size, DelaySchedule, QuadraticConsensusProblem, RunOptions, ThetaSchedule,
};
use crate::rng::{self, Domain, Stream};
use crate::sim::{self, ActivationMode, AlgorithmVariant, BatchRule, CommModel, EvalConfig, SimConfig};
use crate::topology::{self, build_topology, TopologyKind, TopologySpec};
use crate::transport::{self, DiscreteMeasure, Measure, RegularizationConfig, SupportGrid};

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:<18} {} ({:.2} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

fn timed(name: &'static str, body: impl FnOnce() -> Result<(bool, String)>) -> SuiteReport {
    let start = Instant::now();
    let (passed, detail) = body().unwrap_or_else(|e| (false, format!("error: {e}")));
    SuiteReport {
        name,
        passed,
        detail,
        elapsed: start.elapsed(),
    }
}

fn normal_blocks(m: usize, n: usize, scale: f64, stream: &mut Stream) -> Blocks {
    let mut b = Blocks::zeros(m, n);
    for v in b.as_mut_slice() {
        let z: f64 = StandardNormal.sample(stream);
        *v = scale * z;
    }
    b
}

/// Worst relative violation of the θ bounds and of the recursion identity
/// over `k ≤ k_max` for each `m`.
pub fn theta_suite_with(ms: &[usize], k_max: usize, make: impl Fn(usize) -> ThetaSchedule) -> SuiteReport {
    timed("theta", || {
        const TOL: f64 = 1e-10;
        let mut worst_bound = 0.0f64;
        let mut worst_identity = 0.0f64;
        for &m in ms {
            let mut s = make(m);
            s.ensure(k_max + 1);
            for k in 1..=k_max {
                let t = s.theta(k);
                let d = (k - 1 + 2 * m) as f64;
                worst_bound = worst_bound.max((1.0 / d - t) * d).max((t - 2.0 / d) * d / 2.0);
                let next = s.theta(k + 1);
                let lhs = (1.0 - next) / (next * next);
                let rhs = 1.0 / (t * t);
                worst_identity = worst_identity.max((lhs - rhs).abs() / rhs);
            }
        }
        Ok((
            worst_bound <= TOL && worst_identity <= TOL,
            format!("m in {ms:?}, k <= {k_max}: bound violation {worst_bound:.1e}, identity error {worst_identity:.1e}"),
        ))
    })
}

pub fn theta_suite() -> SuiteReport {
    theta_suite_with(&[1, 2, 10, 500], 100_000, ThetaSchedule::new)
}

/// Reference and practical forms on a noisy quadratic with stale reads.
pub fn equivalence_suite(seeds: u64) -> SuiteReport {
    timed("equivalence", || {
        let (m, n, iterations, tau) = (8, 4, 200, 3);
        let mut worst = 0.0f64;
        for seed in 0..seeds {
            let graph = build_topology(&TopologySpec::erdos_renyi(m, 0.5, seed))?;
            let problem = QuadraticConsensusProblem::random(graph, 1.0, n, seed)?;
            let gamma = step_size(problem.smoothness(), tau, m)?;
            let delays = DelaySchedule::uniform(m, tau, iterations + 1, seed);
            let mut opts = RunOptions::new(iterations, gamma, seed);
            opts.record_iterates = true;
            let init = normal_blocks(m, n, 1.0, &mut rng::keyed(seed, Domain::Test, 2, 0));
            let oracle = problem.noisy_oracle(0.5, seed);
            let a = run_asbcds(&oracle, &delays, &opts, &init)?;
            let b = run_pasbcds(&oracle, &delays, &opts, &init)?;
            for (x, y) in a.iterates.iter().zip(&b.iterates) {
                worst = worst.max(x.max_rel_diff(y, 1e-12));
            }
        }
        Ok((
            worst <= 1e-9,
            format!("m=8, K=200, tau=3, {seeds} seeds: max relative deviation {worst:.1e}"),
        ))
    })
}

fn random_discrete(stream: &mut Stream, atoms: usize, dim: usize) -> Result<DiscreteMeasure> {
    let points: Vec<Vec<f64>> = (0..atoms).map(|_| (0..dim).map(|_| stream.random::<f64>()).collect()).collect();
    let weights: Vec<f64> = (0..atoms).map(|_| 0.1 + stream.random::<f64>()).collect();
    let total: f64 = weights.iter().sum();
    DiscreteMeasure::new(&points, weights.iter().map(|w| w / total).collect())
}

/// `E‖√W(ĝ − g)‖² ≤ 1.2·λ_max/M` on a five-node complete graph.
pub fn variance_suite(trials: usize) -> SuiteReport {
    timed("variance", || {
        let m = 5;
        let graph = build_topology(&TopologySpec::new(TopologyKind::Complete, m))?;
        let lap = topology::laplacian(&graph);
        let root = topology::sqrt_laplacian(&lap)?;
        let lambda = topology::lambda_max(&lap, 1e-12)?;
        let grid = SupportGrid::linspace(0.0, 1.0, 5)?;
        let reg = RegularizationConfig::new(0.1)?;
        let mut setup = rng::keyed(11, Domain::Test, 0, 0);
        let measures: Vec<Measure> = (0..m)
            .map(|_| random_discrete(&mut setup, 3, 1).map(Measure::Discrete))
            .collect::<Result<_>>()?;
        let eta = normal_blocks(m, grid.len(), 0.1, &mut setup);
        let exact: Vec<Vec<f64>> = (0..m)
            .map(|i| transport::exact_dual(&measures[i], &grid, eta.block(i), reg).map(|(_, g)| g))
            .collect::<Result<_>>()?;
        let mut ok = true;
        let mut parts = Vec::new();
        for batch in [1usize, 4, 16] {
            let mut stream = rng::keyed(11, Domain::Test, 1, batch as u64);
            let mut total = 0.0;
            for _ in 0..trials {
                let mut err = Blocks::zeros(m, grid.len());
                for i in 0..m {
                    let g = transport::stochastic_grad(&measures[i], &grid, eta.block(i), reg.beta, batch, &mut stream)?;
                    for ((e, a), b) in err.block_mut(i).iter_mut().zip(&g.mean_gradient).zip(&exact[i]) {
                        *e = a - b;
                    }
                }
                total += err.kron_apply(&root).norm_sq();
            }
            let mean = total / trials as f64;
            let bound = 1.2 * lambda / batch as f64;
            ok &= mean <= bound;
            parts.push(format!("M={batch}: {mean:.3} <= {bound:.3}"));
        }
        Ok((ok, parts.join(", ")))
    })
}

/// Primal distance and consensus bounds from the dual gap, with factor 2.
pub fn primal_bound_suite(points: usize) -> SuiteReport {
    timed("primal bounds", || {
        let mut ok = true;
        let mut printed_form_violations = 0usize;
        let mut checks = 0usize;
        for g in 0..5u64 {
            let mut s = rng::keyed(g, Domain::Test, 3, 0);
            let m = s.random_range(3..=10);
            let n = s.random_range(1..=3);
            let mu = 0.5 + s.random::<f64>();
            let graph = build_topology(&TopologySpec::erdos_renyi(m, 0.6, g))?;
            let preset = experiments::quadratic_preset(m, n, mu, g)?;
            let problem = QuadraticConsensusProblem::new(graph, mu, preset.targets.clone())?;
            let star = problem.optimal_value();
            let x_star = problem.optimal_primal();
            let lambda = problem.lambda_max();
            for _ in 0..points {
                let eta = normal_blocks(m, n, 1.0, &mut s);
                let e = problem.dual_eval(&eta)?;
                let gap = e.value - star;
                let dist = e.primal.axpy(-1.0, &x_star).norm_sq();
                let cons = e.primal.kron_apply(problem.sqrt_laplacian()).norm_sq();
                ok &= dist <= 2.0 / mu * gap + 1e-9;
                ok &= cons <= 2.0 * lambda / mu * gap + 1e-9;
                if cons > lambda / mu * gap + 1e-9 {
                    printed_form_violations += 1;
                }
                checks += 1;
            }
        }
        Ok((
            ok,
            format!("{checks} points on 5 graphs; consensus bound without the factor 2 fails at {printed_form_violations} of them"),
        ))
    })
}

/// Exact dual gradients against central differences, plus unbiasedness of
/// the sampled gradient.
pub fn finite_difference_suite(instances: usize, unit_batches: usize) -> SuiteReport {
    timed("finite-difference", || {
        let h = 1e-5;
        let mut worst = 0.0f64;
        let mut outside = 0usize;
        let mut coords = 0usize;
        for inst in 0..instances as u64 {
            let mut s = rng::keyed(inst, Domain::Test, 4, 0);
            let n = s.random_range(2..=5);
            let dim = s.random_range(1..=2);
            let points: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| s.random::<f64>()).collect()).collect();
            let grid = SupportGrid::from_points(&points)?;
            let atoms = s.random_range(1..=4);
            let mu = Measure::Discrete(random_discrete(&mut s, atoms, dim)?);
            let reg = RegularizationConfig::new(0.05 + s.random::<f64>())?;
            let eta: Vec<f64> = (0..n).map(|_| s.sample::<f64, _>(StandardNormal) * 0.5).collect();
            let (_, grad) = transport::exact_dual(&mu, &grid, &eta, reg)?;
            let mut diff = 0.0;
            for l in 0..n {
                let mut plus = eta.clone();
                let mut minus = eta.clone();
                plus[l] += h;
                minus[l] -= h;
                let fd = (transport::exact_dual(&mu, &grid, &plus, reg)?.0 - transport::exact_dual(&mu, &grid, &minus, reg)?.0)
                    / (2.0 * h);
                diff += (fd - grad[l]).powi(2);
            }
            let norm: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            worst = worst.max(diff.sqrt() / norm);

            if unit_batches > 0 && inst < 3 {
                let mut stream = rng::keyed(inst, Domain::Test, 5, 0);
                let mut sum = vec![0.0; n];
                let mut sum_sq = vec![0.0; n];
                for _ in 0..unit_batches {
                    let g = transport::stochastic_grad(&mu, &grid, &eta, reg.beta, 1, &mut stream)?;
                    for l in 0..n {
                        sum[l] += g.mean_gradient[l];
                        sum_sq[l] += g.mean_gradient[l].powi(2);
                    }
                }
                let count = unit_batches as f64;
                for l in 0..n {
                    let mean = sum[l] / count;
                    let var = (sum_sq[l] / count - mean * mean).max(0.0);
                    let se = (var / count).sqrt();
                    // Deterministic coordinates (one atom) still carry summation rounding.
                    let rounding = count * f64::EPSILON * grad[l].abs();
                    if (mean - grad[l]).abs() > 3.0 * se + rounding {
                        outside += 1;
                    }
                    coords += 1;
                }
            }
        }
        Ok((
            worst <= 1e-6 && outside == 0,
            format!(
                "{instances} instances: worst relative error {worst:.1e}; {outside}/{coords} sampled means outside 3 s.e."
            ),
        ))
    })
}

/// `gap(2K)/gap(K)` with exact gradients and fresh reads, averaged over seeds.
pub fn acceleration_suite(seeds: u64, k: usize) -> SuiteReport {
    timed("acceleration", || {
        let m = 8;
        let mut ratios = Vec::new();
        for seed in 0..seeds {
            let graph = build_topology(&TopologySpec::erdos_renyi(m, 0.5, seed))?;
            let problem = QuadraticConsensusProblem::random(graph, 1.0, 3, seed)?;
            let star = problem.optimal_value();
            let gamma = step_size(problem.smoothness(), 0, m)?;
            let delays = DelaySchedule::fresh(m, 2 * k + 1);
            let mut opts = RunOptions::new(2 * k, gamma, seed);
            opts.record_values = true;
            let init = normal_blocks(m, 3, 1.0, &mut rng::keyed(seed, Domain::Test, 6, 0));
            let out = run_pasbcds(&problem.oracle(), &delays, &opts, &init)?;
            // records[j].value is φ(η_{j+1}).
            let gap = |it: usize| out.records[it - 1].value.expect("quadratic has values") - star;
            ratios.push(gap(2 * k) / gap(k));
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        Ok((mean <= 0.5, format!("m=8, K={k}, {seeds} seeds: mean gap(2K)/gap(K) = {mean:.3}")))
    })
}

/// Measured table-entry age against the permutation-activation bound.
pub fn staleness_suite() -> SuiteReport {
    timed("staleness", || {
        let (m, interval, horizon) = (10, 0.2, 120.0);
        let comm = CommModel::default();
        let bound = sim::staleness_bound_s(m, interval, comm.max_delay());
        let graph = build_topology(&TopologySpec::new(TopologyKind::Cycle, m))?;
        let objective = experiments::quadratic_preset(m, 2, 1.0, 0)?.objective();
        let mut worst = 0.0f64;
        for seed in 0..3 {
            let cfg = SimConfig {
                variant: AlgorithmVariant::A2dwb,
                horizon_s: horizon,
                activation_mode: ActivationMode::Permutation,
                interval_s: interval,
                comm: comm.clone(),
                master_seed: seed,
                gamma: 0.01,
                batch: BatchRule::Fixed(1),
                eval: EvalConfig {
                    every_s: horizon,
                    samples: 1,
                    seed: 0,
                },
                topology_label: "cycle".into(),
            };
            worst = worst.max(sim::run_sim(&graph, &objective, &cfg)?.max_entry_age_s);
        }
        Ok((
            worst <= bound + 1e-9,
            format!("cycle m={m}: max entry age {worst:.2} s <= max_delay + (2m-1)*interval = {bound:.2} s"),
        ))
    })
}

/// Every suite at its default size.
pub fn run_all() -> Vec<SuiteReport> {
    vec![
        theta_suite(),
        equivalence_suite(10),
        variance_suite(10_000),
        primal_bound_suite(100),
        finite_difference_suite(20, 100_000),
        acceleration_suite(10, 500),
        staleness_suite(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wrong_step(theta: f64) -> f64 {
        theta / (1.0 + theta)
    }

    #[test]
    fn wrong_recursion_fails_theta_suite() {
        let report = theta_suite_with(&[2, 10], 1000, |m| ThetaSchedule::with_recursion(m, wrong_step));
        assert!(!report.passed, "{report}");
        assert!(theta_suite_with(&[2, 10], 1000, ThetaSchedule::new).passed);
    }

    #[test]
    fn small_suites_pass() {
        for r in [
            equivalence_suite(2),
            variance_suite(500),
            primal_bound_suite(10),
            finite_difference_suite(4, 2000),
            staleness_suite(),
        ] {
            assert!(r.passed, "{r}");
        }
    }
}
