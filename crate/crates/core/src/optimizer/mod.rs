//! Accelerated stochastic block coordinate descent with stale reads.
//!
//! Two forms of one method live here:
//!
//! * [`run_asbcds`] keeps the three full iterate sequences `λ_k, ζ_k, η_k`
//!   and compensates every stale block read with the momentum the block would
//!   have accumulated had it been observed fresh. Memory grows with the
//!   iteration count; it is the reference implementation.
//! * [`run_pasbcds`] tracks only `u, v` with `η = u + θ²v` and touches a
//!   single block per iteration. This is the form the simulator uses.
//!
//! Driven by the same block choices, noise keys and read schedule, the two
//! produce the same trajectory up to rounding.

mod asbcds;
mod delays;
mod pasbcds;
pub mod quadratic;
mod schedules;
mod theta;

use rand::Rng;

pub use asbcds::{compensated_iterate, run_asbcds, AsbcdsState};
pub use delays::DelaySchedule;
pub use pasbcds::{pasbcds_step, run_pasbcds, PasbcdsState};
pub use quadratic::{QuadraticConsensusProblem, QuadraticEval, QuadraticOracle};
pub use schedules::{batch_size, step_size};
pub use theta::{theta_next, ThetaSchedule};

use crate::blocks::Blocks;
use crate::rng::{self, Domain};

/// Stochastic first-order access to a block-separable smooth dual `φ`.
///
/// `sample` identifies the noise realisation `ξ`: calls with equal `sample`
/// and equal inputs return equal outputs, which is what lets two algorithm
/// forms share one noise stream.
pub trait StochasticOracle {
    fn num_blocks(&self) -> usize;
    fn block_dim(&self) -> usize;
    /// `∇φ(point, ξ_sample)^{[block]}`.
    fn partial_gradient(&self, point: &Blocks, block: usize, sample: u64) -> Vec<f64>;
    /// `φ(point)` when it is cheap to evaluate.
    fn value(&self, _point: &Blocks) -> Option<f64> {
        None
    }
    /// Bound `σ²` on `E‖∇φ − ∇φ(·, ξ)‖²`.
    fn variance_proxy(&self) -> f64;
    fn smoothness(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// The loop runs `k = 0 ..= iterations`, returning `η_{iterations+1}`.
    pub iterations: usize,
    pub gamma: f64,
    /// Seed of the uniform block-choice stream.
    pub block_seed: u64,
    pub record_iterates: bool,
    pub record_values: bool,
}

impl RunOptions {
    pub fn new(iterations: usize, gamma: f64, block_seed: u64) -> Self {
        Self {
            iterations,
            gamma,
            block_seed,
            record_iterates: false,
            record_values: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub block: usize,
    /// `max_p (k − j_p(k+1))`.
    pub max_staleness: usize,
    /// `φ(η_{k+1})` when requested and available.
    pub value: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub final_eta: Blocks,
    pub records: Vec<IterationRecord>,
    /// `η_0, …, η_{K+1}` when `record_iterates` is set.
    pub iterates: Vec<Blocks>,
    /// `ζ_0, …` (reference form) or `u_0, …` (practical form), same condition.
    pub anchors: Vec<Blocks>,
}

/// Uniform block index `i_k`.
pub fn choose_block(seed: u64, k: usize, m: usize) -> usize {
    rng::keyed(seed, Domain::BlockChoice, k as u64, 0).random_range(0..m)
}

fn check_run(oracle: &dyn StochasticOracle, delays: &DelaySchedule, opts: &RunOptions, initial: &Blocks) -> crate::Result<()> {
    use crate::Error;
    if initial.num_blocks() != oracle.num_blocks() || initial.block_dim() != oracle.block_dim() {
        return Err(Error::arg("initial point does not match the oracle's block shape"));
    }
    if delays.num_blocks() != oracle.num_blocks() {
        return Err(Error::Schedule(format!(
            "schedule covers {} blocks, oracle has {}",
            delays.num_blocks(),
            oracle.num_blocks()
        )));
    }
    if delays.len() < opts.iterations + 1 {
        return Err(Error::Schedule(format!(
            "schedule covers {} iterations, run needs {}",
            delays.len(),
            opts.iterations + 1
        )));
    }
    if !(opts.gamma > 0.0 && opts.gamma.is_finite()) {
        return Err(Error::arg(format!("step size must be positive, got {}", opts.gamma)));
    }
    Ok(())
}
