use std::collections::VecDeque;

use super::{check_run, choose_block, DelaySchedule, IterationRecord, RunOptions, RunOutput, StochasticOracle, ThetaSchedule};
use crate::blocks::Blocks;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
struct Version {
    valid_from: usize,
    u: Vec<f64>,
    v: Vec<f64>,
}

/// `(u_k, v_k)` plus, per block, the versions still inside the read window.
#[derive(Debug, Clone)]
pub struct PasbcdsState {
    u: Blocks,
    v: Blocks,
    /// Iterations completed; the state holds `u_k, v_k` for `k = this`.
    k: usize,
    history: Vec<VecDeque<Version>>,
}

impl PasbcdsState {
    /// `u_0 = η_0`, `v_0 = 0`.
    pub fn new(initial: Blocks) -> Self {
        let m = initial.num_blocks();
        let n = initial.block_dim();
        let v = Blocks::zeros(m, n);
        let history = (0..m)
            .map(|p| {
                VecDeque::from([Version {
                    valid_from: 0,
                    u: initial.block(p).to_vec(),
                    v: vec![0.0; n],
                }])
            })
            .collect();
        Self { u: initial, v, k: 0, history }
    }

    pub fn u(&self) -> &Blocks {
        &self.u
    }

    pub fn v(&self) -> &Blocks {
        &self.v
    }

    pub fn iterations_done(&self) -> usize {
        self.k
    }

    /// `η_k = u_k + θ_k² v_k` (with `θ_0` irrelevant since `v_0 = 0`).
    pub fn eta(&self, thetas: &mut ThetaSchedule) -> Blocks {
        if self.k == 0 {
            return self.u.clone();
        }
        let t = thetas.theta(self.k);
        self.u.axpy(t * t, &self.v)
    }

    /// `u_j^[p] + θ_{k+1}² v_j^[p]`: block `p` as read at `j` by iteration `k`.
    pub fn read_block(&self, p: usize, j: usize, theta_next: f64) -> Result<Vec<f64>> {
        let versions = &self.history[p];
        let ver = versions
            .iter()
            .rev()
            .find(|ver| ver.valid_from <= j)
            .ok_or_else(|| Error::Schedule(format!("block {p} version at iteration {j} was already discarded")))?;
        let t2 = theta_next * theta_next;
        Ok(ver.u.iter().zip(&ver.v).map(|(u, v)| u + t2 * v).collect())
    }

    /// Drops versions no read at iteration `>= earliest` can select.
    fn prune(&mut self, earliest: usize) {
        for versions in &mut self.history {
            while versions.len() > 1 && versions[1].valid_from <= earliest {
                versions.pop_front();
            }
        }
    }
}

/// One block update `k → k+1` with gradient `g` for `block`.
///
/// `δ = γ/(mθ) g`, `u^[i] −= δ`, `v^[i] += (1 − mθ)/θ² δ` with `θ = θ_{k+1}`.
pub fn pasbcds_step(
    state: &mut PasbcdsState,
    thetas: &mut ThetaSchedule,
    block: usize,
    gradient: &[f64],
    gamma: f64,
) {
    let m = state.u.num_blocks() as f64;
    let theta = thetas.theta(state.k + 1);
    let scale = gamma / (m * theta);
    let v_scale = (1.0 - m * theta) / (theta * theta);
    for ((u, v), g) in state
        .u
        .block_mut(block)
        .iter_mut()
        .zip(state.v.block_mut(block).iter_mut())
        .zip(gradient)
    {
        let delta = scale * g;
        *u -= delta;
        *v += v_scale * delta;
    }
    state.k += 1;
    let version = Version {
        valid_from: state.k,
        u: state.u.block(block).to_vec(),
        v: state.v.block(block).to_vec(),
    };
    state.history[block].push_back(version);
}

/// Practical form of the method; see the module docs.
pub fn run_pasbcds(
    oracle: &dyn StochasticOracle,
    delays: &DelaySchedule,
    opts: &RunOptions,
    initial: &Blocks,
) -> Result<RunOutput> {
    check_run(oracle, delays, opts, initial)?;
    let m = oracle.num_blocks();
    let tau = delays.tau();
    let mut thetas = ThetaSchedule::new(m);
    let mut state = PasbcdsState::new(initial.clone());
    let mut records = Vec::with_capacity(opts.iterations + 1);
    let mut iterates = Vec::new();
    let mut anchors = Vec::new();
    if opts.record_iterates {
        iterates.push(initial.clone());
        anchors.push(initial.clone());
    }

    let mut omega = initial.clone();
    for k in 0..=opts.iterations {
        let theta = thetas.theta(k + 1);
        let mut max_staleness = 0;
        for p in 0..m {
            let j = delays.read_index(p, k)?;
            max_staleness = max_staleness.max(k - j);
            let b = state.read_block(p, j, theta)?;
            omega.block_mut(p).copy_from_slice(&b);
        }
        let block = choose_block(opts.block_seed, k, m);
        let g = oracle.partial_gradient(&omega, block, (k + 1) as u64);
        pasbcds_step(&mut state, &mut thetas, block, &g, opts.gamma);
        state.prune((k + 1).saturating_sub(tau));

        let needs_eta = opts.record_iterates || opts.record_values;
        let eta = needs_eta.then(|| state.eta(&mut thetas));
        let value = match (&eta, opts.record_values) {
            (Some(e), true) => oracle.value(e),
            _ => None,
        };
        records.push(IterationRecord {
            k,
            block,
            max_staleness,
            value,
        });
        if opts.record_iterates {
            iterates.push(eta.expect("computed above"));
            anchors.push(state.u.clone());
        }
    }

    Ok(RunOutput {
        final_eta: state.eta(&mut thetas),
        records,
        iterates,
        anchors,
    })
}
