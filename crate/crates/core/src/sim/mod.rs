//! Discrete-event simulation of the asynchronous decentralized protocol.
//!
//! A single logical thread advances a virtual clock in integer microseconds.
//! Nodes activate on a seeded schedule, compute a stochastic gradient at their
//! own barred iterate, broadcast it with sampled per-message delays, and
//! update from the newest neighbour gradients they hold. Every random draw is
//! keyed by `(master_seed, purpose, iteration, node/message)`, so a config
//! replays to the same bits.

mod events;
mod network;
mod time;
mod world;

pub use events::{Event, EventKind, EventQueue, Message};
pub use network::{build_schedule, ActivationMode, ActivationSchedule, CommModel};
pub use time::SimTime;
pub use world::{activate_node, sync_round, Activation, AlgorithmVariant, NodeObjective, NodeState, Round, World};

use crate::blocks::Blocks;
use crate::error::{Error, Result};
use crate::experiments::{self, Trace, TraceRow};
use crate::optimizer::{batch_size, ThetaSchedule};
use crate::topology::{self, Graph};

/// Mini-batch size per gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BatchRule {
    Fixed(usize),
    /// The growing accuracy-`ε` schedule, with `L = λ_max/modulus`.
    Schedule { epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub every_s: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            every_s: 2.0,
            samples: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub variant: AlgorithmVariant,
    pub horizon_s: f64,
    pub activation_mode: ActivationMode,
    pub interval_s: f64,
    pub comm: CommModel,
    pub master_seed: u64,
    pub gamma: f64,
    pub batch: BatchRule,
    pub eval: EvalConfig,
    /// Written into the `topology` column of the trace.
    pub topology_label: String,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon_s >= 0.0 && self.horizon_s.is_finite()) {
            return Err(Error::arg(format!("horizon must be non-negative, got {}", self.horizon_s)));
        }
        if !(self.interval_s > 0.0 && self.interval_s.is_finite()) {
            return Err(Error::arg(format!("activation interval must be positive, got {}", self.interval_s)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::arg(format!("step size must be positive, got {}", self.gamma)));
        }
        if !(self.eval.every_s > 0.0 && self.eval.every_s.is_finite()) {
            return Err(Error::arg(format!("evaluation period must be positive, got {}", self.eval.every_s)));
        }
        if self.eval.samples == 0 {
            return Err(Error::arg("evaluation needs at least one sample"));
        }
        match self.batch {
            BatchRule::Fixed(0) => return Err(Error::arg("batch size must be at least 1")),
            BatchRule::Schedule { epsilon } if !(epsilon > 0.0) => {
                return Err(Error::arg(format!("target accuracy must be positive, got {epsilon}")));
            }
            _ => {}
        }
        self.comm.validate()
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub trace: Trace,
    /// `η̄` at the horizon.
    pub final_iterate: Blocks,
    /// Activations (asynchronous) or completed rounds (synchronous).
    pub iterations: u64,
    /// Largest age `t − stamp` of a table entry read by an activation.
    pub max_entry_age_s: f64,
    /// Deliveries discarded for arriving after a newer message.
    pub stale_drops: u64,
}

struct Batcher {
    rule: BatchRule,
    m: usize,
    smoothness: f64,
    variance: f64,
}

impl Batcher {
    fn new(rule: BatchRule, graph: &Graph, objective: &NodeObjective) -> Result<Self> {
        // Per-sample variance of the stacked gradient is at most λ_max for
        // simplex-valued node gradients.
        let (smoothness, variance) = match rule {
            BatchRule::Fixed(_) => (f64::NAN, f64::NAN),
            BatchRule::Schedule { .. } => {
                let lam = topology::lambda_max(&topology::laplacian(graph), 1e-10)?;
                (lam / objective.modulus(), lam * objective.unit_variance())
            }
        };
        Ok(Self {
            rule,
            m: graph.num_nodes(),
            smoothness,
            variance,
        })
    }

    fn size(&self, k: u64) -> Result<usize> {
        match self.rule {
            BatchRule::Fixed(b) => Ok(b),
            BatchRule::Schedule { epsilon } => {
                batch_size(k as usize, self.m, self.variance, epsilon, self.smoothness)
            }
        }
    }
}

/// Stable bound on a table entry's age under permutation activation.
///
/// A neighbour's consecutive activations are at most `2m − 1` ticks apart
/// across two sweeps, and each message is in flight at most `max_delay`.
pub fn staleness_bound_s(m: usize, interval_s: f64, max_delay_s: f64) -> f64 {
    max_delay_s + (2 * m - 1) as f64 * interval_s
}

/// Runs one variant to the horizon and records evaluation snapshots.
///
/// Snapshot `T` reflects every event with time `≤ T`; the first is at `T = 0`
/// and a final one is taken at the horizon when it is off the grid.
pub fn run_sim(graph: &Graph, objective: &NodeObjective, cfg: &SimConfig) -> Result<SimOutput> {
    cfg.validate()?;
    let m = graph.num_nodes();
    let horizon = SimTime::from_secs(cfg.horizon_s)?;
    let every = SimTime::from_secs(cfg.eval.every_s)?;
    if every == SimTime::ZERO {
        return Err(Error::arg("evaluation period rounds to zero microseconds"));
    }
    let batcher = Batcher::new(cfg.batch, graph, objective)?;
    let mut world = World::new(graph.clone(), objective.clone(), cfg.master_seed, batcher.size(0)?)?;
    let mut thetas = ThetaSchedule::new(m);
    let mut eval_times: Vec<SimTime> = (0..=horizon.0 / every.0).map(|e| SimTime(e * every.0)).collect();
    if eval_times.last() != Some(&horizon) {
        eval_times.push(horizon);
    }

    let mut trace = Trace::default();
    let mut max_age = SimTime::ZERO;
    let mut stale_drops = 0;
    let iterations;

    match cfg.variant {
        AlgorithmVariant::A2dwb | AlgorithmVariant::A2dwbn => {
            let mut schedule = ActivationSchedule::new(cfg.activation_mode, m, cfg.interval_s, cfg.master_seed)?;
            let mut queue = EventQueue::new();
            let mut k: u64 = 0;
            if schedule.time(0) <= horizon {
                queue.push(schedule.time(0), EventKind::Activate { node: schedule.node(0) });
            }
            for &eval_t in &eval_times {
                while queue.peek_time().is_some_and(|t| t <= eval_t) {
                    let event = queue.pop().expect("peeked");
                    match event.kind {
                        EventKind::Activate { node } => {
                            let theta = thetas.theta(k as usize + 1);
                            let act = activate_node(
                                &mut world,
                                cfg.variant,
                                node,
                                event.time,
                                k,
                                theta,
                                cfg.gamma,
                                batcher.size(k + 1)?,
                                cfg.master_seed,
                            )?;
                            max_age = max_age.max(act.max_entry_age);
                            for &j in graph.neighbors(node) {
                                let delay = cfg.comm.sample_delay_time(cfg.master_seed, k, world::message_key(node, j))?;
                                let msg = Message {
                                    from: node,
                                    to: j,
                                    sent: event.time,
                                    gradient: act.gradient.clone(),
                                };
                                queue.push(event.time + delay, EventKind::Deliver(msg));
                            }
                            k += 1;
                            let next = schedule.time(k);
                            if next <= horizon {
                                queue.push(next, EventKind::Activate { node: schedule.node(k) });
                            }
                        }
                        EventKind::Deliver(msg) => {
                            if msg.sent >= event.time {
                                return Err(Error::Invariant("delivery not after its send time".into()));
                            }
                            if !world.nodes[msg.to].receive(msg.from, msg.sent, msg.gradient)? {
                                stale_drops += 1;
                            }
                        }
                    }
                }
                let theta = if k == 0 { 1.0 } else { thetas.theta(k as usize) };
                trace.rows.push(snapshot(&world, cfg, eval_t, k, theta)?);
            }
            iterations = k;
        }
        AlgorithmVariant::SyncBaseline => {
            let idle = SimTime::from_secs(cfg.interval_s)?;
            let mut r: u64 = 0;
            let mut start = SimTime::ZERO;
            for &eval_t in &eval_times {
                loop {
                    let end = start + round_duration(graph, &cfg.comm, cfg.master_seed, r, idle)?;
                    if end > eval_t {
                        break;
                    }
                    let theta = thetas.theta(r as usize + 1);
                    let round = sync_round(
                        &mut world,
                        r,
                        start,
                        theta,
                        cfg.gamma,
                        batcher.size(r + 1)?,
                        &cfg.comm,
                        cfg.master_seed,
                        idle,
                    )?;
                    debug_assert_eq!(start + round.duration, end);
                    start = end;
                    r += 1;
                }
                let theta = if r == 0 { 1.0 } else { thetas.theta(r as usize) };
                trace.rows.push(snapshot(&world, cfg, eval_t, r, theta)?);
            }
            iterations = r;
        }
    }

    let theta = if iterations == 0 { 1.0 } else { thetas.theta(iterations as usize) };
    Ok(SimOutput {
        trace,
        final_iterate: world.barred_iterate(theta),
        iterations,
        max_entry_age_s: max_age.as_secs(),
        stale_drops,
    })
}

/// Duration of synchronous round `r`, drawn from the same keys `sync_round` uses.
fn round_duration(graph: &Graph, comm: &CommModel, seed: u64, r: u64, idle: SimTime) -> Result<SimTime> {
    let mut longest: Option<f64> = None;
    for i in 0..graph.num_nodes() {
        for &j in graph.neighbors(i) {
            let d = comm.sample_delay(seed, r, world::message_key(i, j));
            longest = Some(longest.map_or(d, |l: f64| l.max(d)));
        }
    }
    longest.map_or(Ok(idle), SimTime::from_secs)
}

fn snapshot(world: &World, cfg: &SimConfig, t: SimTime, iter: u64, theta: f64) -> Result<TraceRow> {
    let eta = world.barred_iterate(theta);
    let mut primal = Vec::with_capacity(world.num_nodes());
    for (i, y) in eta.rows().enumerate() {
        primal.push(world.objective.primal(i, y, cfg.eval.samples, cfg.eval.seed)?);
    }
    let feasible = experiments::project_to_range(&eta);
    let mut dual = 0.0;
    for (i, y) in feasible.rows().enumerate() {
        dual += world.objective.value(i, y, cfg.eval.samples, cfg.eval.seed)?;
    }
    let primal = Blocks::from_rows(&primal).expect("uniform node dimension");
    Ok(TraceRow {
        virtual_time_s: t.as_secs(),
        global_iter: iter,
        algorithm: cfg.variant.as_str().to_string(),
        topology: cfg.topology_label.clone(),
        seed: cfg.master_seed,
        dual_objective: dual,
        consensus_distance: experiments::consensus_distance(&world.graph, &primal)?,
    })
}
