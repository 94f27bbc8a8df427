use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::SimTime;
use crate::blocks::Blocks;
use crate::error::{Error, Result};
use crate::experiments;
use crate::rng::{self, Domain};
use crate::topology::Graph;
use crate::transport::{self, Measure, RegularizationConfig, SupportGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmVariant {
    /// Compensated asynchronous method.
    A2dwb,
    /// Asynchronous, reading its own iterate with the `θ` of its last update.
    A2dwbn,
    /// All nodes update per round behind a barrier.
    SyncBaseline,
}

impl AlgorithmVariant {
    pub const ALL: [AlgorithmVariant; 3] = [Self::A2dwb, Self::A2dwbn, Self::SyncBaseline];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::A2dwb => "a2dwb",
            Self::A2dwbn => "a2dwbn",
            Self::SyncBaseline => "sync_baseline",
        }
    }
}

impl std::str::FromStr for AlgorithmVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::arg(format!("unknown variant `{s}` (expected a2dwb, a2dwbn or sync_baseline)")))
    }
}

/// Node-local conjugate `W*_i` evaluated at the barred potential `η̄_i`.
#[derive(Debug, Clone)]
pub enum NodeObjective {
    /// Entropic transport dual of each node's measure onto a shared grid.
    Transport {
        measures: Vec<Measure>,
        grid: SupportGrid,
        reg: RegularizationConfig,
    },
    /// `W*_i(y) = ‖y‖²/(2μ) + ⟨y, b_i⟩`, gradient `b_i + y/μ`.
    Quadratic { targets: Blocks, mu: f64 },
}

impl NodeObjective {
    pub fn num_nodes(&self) -> usize {
        match self {
            Self::Transport { measures, .. } => measures.len(),
            Self::Quadratic { targets, .. } => targets.num_blocks(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Transport { grid, .. } => grid.len(),
            Self::Quadratic { targets, .. } => targets.block_dim(),
        }
    }

    /// Strong convexity of the primal; the dual is `λ_max/this`-smooth.
    pub fn modulus(&self) -> f64 {
        match self {
            Self::Transport { reg, .. } => reg.beta,
            Self::Quadratic { mu, .. } => *mu,
        }
    }

    /// Per-unit-batch gradient variance bound used by the batch schedule.
    pub fn unit_variance(&self) -> f64 {
        match self {
            Self::Transport { .. } => 1.0,
            Self::Quadratic { .. } => 0.0,
        }
    }

    /// Mini-batch gradient of node `i` drawn from `stream`.
    pub fn gradient(&self, i: usize, y: &[f64], batch: usize, stream: &mut rng::Stream) -> Result<Vec<f64>> {
        match self {
            Self::Transport { measures, grid, reg } => {
                Ok(transport::stochastic_grad(&measures[i], grid, y, reg.beta, batch, stream)?.mean_gradient)
            }
            Self::Quadratic { targets, mu } => {
                Ok(targets.block(i).iter().zip(y).map(|(b, v)| b + v / mu).collect())
            }
        }
    }

    /// `W*_i(y)`: Monte-Carlo for measures (common variates across nodes),
    /// closed form for the quadratic.
    pub fn value(&self, i: usize, y: &[f64], samples: usize, eval_seed: u64) -> Result<f64> {
        match self {
            Self::Transport { measures, grid, reg } => {
                let mut stream = rng::keyed(eval_seed, Domain::Evaluation, 0, 0);
                transport::dual_value_mc(&measures[i], grid, y, *reg, samples, &mut stream)
            }
            Self::Quadratic { targets, mu } => Ok(y
                .iter()
                .zip(targets.block(i))
                .map(|(v, b)| v * v / (2.0 * mu) + v * b)
                .sum()),
        }
    }

    /// Node `i`'s primal estimate `p_i` at `y`.
    pub fn primal(&self, i: usize, y: &[f64], samples: usize, eval_seed: u64) -> Result<Vec<f64>> {
        match self {
            Self::Transport { measures, grid, reg } => {
                experiments::primal_estimate(y, &measures[i], grid, reg.beta, samples, eval_seed)
            }
            Self::Quadratic { .. } => {
                let mut unused = rng::keyed(0, Domain::Evaluation, 0, 0);
                self.gradient(i, y, 1, &mut unused)
            }
        }
    }
}

#[derive(Debug, Clone)]
struct TableEntry {
    neighbor: usize,
    gradient: Rc<[f64]>,
    stamp: SimTime,
}

/// Barred practical iterates and stale neighbour gradients of one node.
#[derive(Debug, Clone)]
pub struct NodeState {
    pub u_bar: Vec<f64>,
    pub v_bar: Vec<f64>,
    table: Vec<TableEntry>,
    pub own_last_gradient: Rc<[f64]>,
    pub local_iterations: usize,
    /// `θ` used at this node's last own update.
    pub last_theta: Option<f64>,
}

impl NodeState {
    /// Table entries sorted by neighbour id.
    pub fn table(&self) -> impl Iterator<Item = (usize, &[f64], SimTime)> {
        self.table.iter().map(|e| (e.neighbor, &*e.gradient, e.stamp))
    }

    pub fn stamp_of(&self, neighbor: usize) -> Option<SimTime> {
        self.entry(neighbor).map(|e| e.stamp)
    }

    fn entry(&self, neighbor: usize) -> Option<&TableEntry> {
        self.table
            .binary_search_by_key(&neighbor, |e| e.neighbor)
            .ok()
            .map(|pos| &self.table[pos])
    }

    /// `u + θ²v`.
    pub fn barred(&self, theta: f64) -> Vec<f64> {
        let t2 = theta * theta;
        self.u_bar.iter().zip(&self.v_bar).map(|(u, v)| u + t2 * v).collect()
    }

    /// Stores `gradient` if it was sent after the held entry; returns whether it did.
    pub fn receive(&mut self, from: usize, sent: SimTime, gradient: Rc<[f64]>) -> Result<bool> {
        let pos = self
            .table
            .binary_search_by_key(&from, |e| e.neighbor)
            .map_err(|_| Error::Invariant(format!("message from non-neighbour {from}")))?;
        let entry = &mut self.table[pos];
        if sent > entry.stamp {
            entry.stamp = sent;
            entry.gradient = gradient;
            Ok(true)
        } else {
            Ok(false)
        }
    }
}

/// Shared simulation state.
#[derive(Debug, Clone)]
pub struct World {
    pub graph: Graph,
    pub objective: NodeObjective,
    pub nodes: Vec<NodeState>,
}

/// Result of one activation.
#[derive(Debug, Clone)]
pub struct Activation {
    pub gradient: Rc<[f64]>,
    pub delta: Vec<f64>,
    /// Largest `t − stamp` over the table entries read.
    pub max_entry_age: SimTime,
}

impl World {
    /// Every node starts at `η̄ = 0` with neighbours' gradients at `0` on hand.
    pub fn new(graph: Graph, objective: NodeObjective, seed: u64, batch: usize) -> Result<Self> {
        let m = graph.num_nodes();
        if objective.num_nodes() != m {
            return Err(Error::arg(format!(
                "objective has {} nodes for an {m}-node graph",
                objective.num_nodes()
            )));
        }
        let n = objective.dim();
        let zero = vec![0.0; n];
        let initial: Vec<Rc<[f64]>> = (0..m)
            .map(|i| {
                let mut stream = rng::keyed(seed, Domain::Gradient, u64::MAX, i as u64);
                objective.gradient(i, &zero, batch, &mut stream).map(Rc::from)
            })
            .collect::<Result<_>>()?;
        let nodes = (0..m)
            .map(|i| {
                let mut neighbors = graph.neighbors(i).to_vec();
                neighbors.sort_unstable();
                NodeState {
                    u_bar: zero.clone(),
                    v_bar: zero.clone(),
                    table: neighbors
                        .into_iter()
                        .map(|j| TableEntry {
                            neighbor: j,
                            gradient: initial[j].clone(),
                            stamp: SimTime::ZERO,
                        })
                        .collect(),
                    own_last_gradient: initial[i].clone(),
                    local_iterations: 0,
                    last_theta: None,
                }
            })
            .collect();
        Ok(Self { graph, objective, nodes })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    /// `η̄ = ū + θ²v̄` stacked over nodes.
    pub fn barred_iterate(&self, theta: f64) -> Blocks {
        let rows: Vec<Vec<f64>> = self.nodes.iter().map(|s| s.barred(theta)).collect();
        Blocks::from_rows(&rows).expect("uniform node dimension")
    }

    /// `deg(i)·g − Σ_{j∈neigh(i)} g_j^local`.
    fn laplacian_row(&self, i: usize, own: &[f64], t: SimTime) -> Result<(Vec<f64>, SimTime)> {
        let state = &self.nodes[i];
        let deg = self.graph.degree(i) as f64;
        let mut combo: Vec<f64> = own.iter().map(|g| deg * g).collect();
        let mut oldest = SimTime::ZERO;
        for &j in self.graph.neighbors(i) {
            let entry = state
                .entry(j)
                .ok_or_else(|| Error::Invariant(format!("node {i} holds no entry for neighbour {j}")))?;
            for (c, g) in combo.iter_mut().zip(entry.gradient.iter()) {
                *c -= g;
            }
            oldest = oldest.max(t.saturating_sub(entry.stamp));
        }
        Ok((combo, oldest))
    }

    /// Applies `ū −= δ`, `v̄ += (1 − mθ)/θ² δ` for `δ = γ/(mθ) · combo`.
    fn apply_update(&mut self, i: usize, combo: &[f64], theta: f64, gamma: f64) -> Vec<f64> {
        let m = self.num_nodes() as f64;
        let scale = gamma / (m * theta);
        let v_scale = (1.0 - m * theta) / (theta * theta);
        let state = &mut self.nodes[i];
        let delta: Vec<f64> = combo.iter().map(|c| scale * c).collect();
        for ((u, v), d) in state.u_bar.iter_mut().zip(state.v_bar.iter_mut()).zip(&delta) {
            *u -= d;
            *v += v_scale * d;
        }
        state.local_iterations += 1;
        state.last_theta = Some(theta);
        delta
    }
}

/// One asynchronous activation of node `i` at time `t` as global iteration `k`.
///
/// The caller broadcasts the returned gradient.
#[allow(clippy::too_many_arguments)]
pub fn activate_node(
    world: &mut World,
    variant: AlgorithmVariant,
    i: usize,
    t: SimTime,
    k: u64,
    theta: f64,
    gamma: f64,
    batch: usize,
    seed: u64,
) -> Result<Activation> {
    if i >= world.num_nodes() {
        return Err(Error::arg(format!("node {i} does not exist")));
    }
    let read_theta = match variant {
        AlgorithmVariant::A2dwb => theta,
        AlgorithmVariant::A2dwbn => world.nodes[i].last_theta.unwrap_or(theta),
        AlgorithmVariant::SyncBaseline => {
            return Err(Error::arg("the synchronous baseline advances by rounds, not activations"));
        }
    };
    let omega = world.nodes[i].barred(read_theta);
    let mut stream = rng::keyed(seed, Domain::Gradient, k, i as u64);
    let g: Rc<[f64]> = world.objective.gradient(i, &omega, batch, &mut stream)?.into();
    let (combo, max_entry_age) = world.laplacian_row(i, &g, t)?;
    let delta = world.apply_update(i, &combo, theta, gamma);
    world.nodes[i].own_last_gradient = g.clone();
    Ok(Activation {
        gradient: g,
        delta,
        max_entry_age,
    })
}

/// Outcome of one barrier round.
#[derive(Debug, Clone)]
pub struct Round {
    pub duration: SimTime,
    pub edge_delays: Vec<f64>,
}

/// One synchronous round `r`: fresh gradients everywhere, exchanged behind a
/// barrier, then one update per node with the shared `θ`.
///
/// The round lasts as long as its slowest message; without edges it lasts
/// `idle`.
#[allow(clippy::too_many_arguments)]
pub fn sync_round(
    world: &mut World,
    r: u64,
    start: SimTime,
    theta: f64,
    gamma: f64,
    batch: usize,
    comm: &super::CommModel,
    seed: u64,
    idle: SimTime,
) -> Result<Round> {
    let m = world.num_nodes();
    let grads: Vec<Rc<[f64]>> = (0..m)
        .map(|i| {
            let omega = world.nodes[i].barred(theta);
            let mut stream = rng::keyed(seed, Domain::Gradient, r, i as u64);
            world.objective.gradient(i, &omega, batch, &mut stream).map(Rc::from)
        })
        .collect::<Result<_>>()?;
    let mut edge_delays = Vec::new();
    for i in 0..m {
        for &j in world.graph.neighbors(i) {
            edge_delays.push(comm.sample_delay(seed, r, message_key(i, j)));
        }
    }
    let longest = edge_delays.iter().copied().fold(0.0, f64::max);
    let duration = if edge_delays.is_empty() { idle } else { SimTime::from_secs(longest)? };
    for i in 0..m {
        let deg = world.graph.degree(i) as f64;
        let mut combo: Vec<f64> = grads[i].iter().map(|g| deg * g).collect();
        for &j in world.graph.neighbors(i) {
            for (c, g) in combo.iter_mut().zip(grads[j].iter()) {
                *c -= g;
            }
        }
        world.apply_update(i, &combo, theta, gamma);
        world.nodes[i].own_last_gradient = grads[i].clone();
        for pos in 0..world.nodes[i].table.len() {
            let j = world.nodes[i].table[pos].neighbor;
            let entry = &mut world.nodes[i].table[pos];
            entry.gradient = grads[j].clone();
            entry.stamp = start;
        }
    }
    Ok(Round { duration, edge_delays })
}

/// Delay-stream key of the directed message `i → j`.
pub(crate) fn message_key(i: usize, j: usize) -> u64 {
    ((i as u64) << 32) | j as u64
}
