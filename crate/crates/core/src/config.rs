//! JSON run configuration.
//!
//! ```json
//! {
//!   "topology":  { "kind": "cycle", "m": 20 },
//!   "problem":   { "preset": "gaussian", "n": 50, "beta": 1.0, "seed": 0 },
//!   "algorithm": { "variant": "a2dwb", "gamma": "auto", "batch": 10 },
//!   "sim": {
//!     "horizon_s": 200.0,
//!     "activation": { "mode": "permutation", "interval_s": 0.01 },
//!     "delay": { "support": [0.2, 0.4, 0.6, 0.8, 1.0], "probs": [0.2, 0.2, 0.2, 0.2, 0.2] },
//!     "master_seed": 0
//!   },
//!   "eval": { "eval_every_s": 2.0, "eval_samples": 200, "eval_seed": 0 }
//! }
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments;
use crate::mnist;
use crate::optimizer::step_size;
use crate::sim::{ActivationMode, AlgorithmVariant, BatchRule, CommModel, EvalConfig, NodeObjective, SimConfig};
use crate::topology::{self, build_topology, Graph, TopologySpec};
use crate::transport::{DiscreteMeasure, Measure, RegularizationConfig, SupportGrid};

/// Help text listing every config field; shown by `barycenter run --help`.
pub const FIELD_REFERENCE: &str = "\
CONFIG FIELDS (JSON)
  topology.kind              complete | erdos_renyi | cycle | star
  topology.m                 number of nodes (>= 2)
  topology.er_edge_prob      edge probability in (0, 1], erdos_renyi only
  topology.seed              graph seed, erdos_renyi only (default 0)
  problem.preset             gaussian | quadratic | discrete | mnist
    gaussian:  n (grid size >= 2), beta, seed, include_entropy_constant
               means ~ U[-4, 4], std ~ U[0.1, 0.6], grid = n points on [-5, 5]
    quadratic: n (block dimension), mu, seed; node targets are centred N(0, 1)
    discrete:  beta, support {min, max, n}, measures [{atoms, weights}] (one per
               node, or a single measure shared by all), include_entropy_constant
    mnist:     beta, manifest (from mnist-prepare) or images + labels + digit,
               seed (image selection), prune_zero (default true),
               include_entropy_constant
  algorithm.variant          a2dwb | a2dwbn | sync_baseline
  algorithm.gamma            \"auto\" or a positive number
  algorithm.tau_assumed      staleness bound for auto gamma (<= m); default
                             min(ceil(max_delay / interval_s), m)
  algorithm.batch            \"auto\" (growing schedule) or a positive integer
  algorithm.epsilon          target accuracy of the auto batch schedule (default 0.01)
  sim.horizon_s              virtual seconds to simulate (>= 0)
  sim.activation.mode        permutation | random
  sim.activation.interval_s  spacing of consecutive activations (> 0)
  sim.delay.support          message delays in seconds (> 0)
  sim.delay.probs            probabilities over the support (sum to 1)
  sim.master_seed            seed of activation, delay and gradient streams
  eval.eval_every_s          snapshot period in virtual seconds (default 2.0)
  eval.eval_samples          Monte-Carlo samples per node and snapshot (default 200)
  eval.eval_seed             seed of the evaluation stream (default 0)
";

/// `"auto"` or a literal value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AutoOr<T> {
    Auto,
    Value(T),
}

impl<T: Serialize> Serialize for AutoOr<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            AutoOr::Auto => s.serialize_str("auto"),
            AutoOr::Value(v) => v.serialize(s),
        }
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for AutoOr<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw<T> {
            Text(String),
            Value(T),
        }
        match Raw::<T>::deserialize(d)
            .map_err(|_| de::Error::custom("expected \"auto\" or a number"))?
        {
            Raw::Text(t) if t == "auto" => Ok(AutoOr::Auto),
            Raw::Text(t) => Err(de::Error::custom(format!("expected \"auto\" or a number, got \"{t}\""))),
            Raw::Value(v) => Ok(AutoOr::Value(v)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    /// One-dimensional atoms.
    pub atoms: Vec<f64>,
    pub weights: Vec<f64>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    Gaussian {
        n: usize,
        beta: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        include_entropy_constant: bool,
    },
    Quadratic {
        n: usize,
        mu: f64,
        #[serde(default)]
        seed: u64,
    },
    Discrete {
        beta: f64,
        support: GridSpec,
        measures: Vec<MeasureSpec>,
        #[serde(default)]
        include_entropy_constant: bool,
    },
    Mnist {
        beta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        manifest: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        images: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        digit: Option<u8>,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_true")]
        prune_zero: bool,
        #[serde(default)]
        include_entropy_constant: bool,
    },
}

fn default_epsilon() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub variant: AlgorithmVariant,
    pub gamma: AutoOr<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_assumed: Option<usize>,
    pub batch: AutoOr<usize>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivationConfig {
    pub mode: ActivationMode,
    pub interval_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimBlock {
    pub horizon_s: f64,
    pub activation: ActivationConfig,
    #[serde(default)]
    pub delay: CommModel,
    #[serde(default)]
    pub master_seed: u64,
}

fn default_every() -> f64 {
    2.0
}

fn default_samples() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalBlock {
    #[serde(default = "default_every")]
    pub eval_every_s: f64,
    #[serde(default = "default_samples")]
    pub eval_samples: usize,
    #[serde(default)]
    pub eval_seed: u64,
}

impl Default for EvalBlock {
    fn default() -> Self {
        Self {
            eval_every_s: default_every(),
            eval_samples: default_samples(),
            eval_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub topology: TopologySpec,
    pub problem: ProblemConfig,
    pub algorithm: AlgorithmConfig,
    pub sim: SimBlock,
    #[serde(default)]
    pub eval: EvalBlock,
}

/// Everything `run_sim` needs, derived from a validated config.
#[derive(Debug, Clone)]
pub struct PreparedRun {
    pub graph: Graph,
    pub objective: NodeObjective,
    pub sim: SimConfig,
    pub lambda_max: f64,
}

fn field_err(field: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Config { .. } => e,
        other => Error::config(field, other.to_string()),
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be a positive finite number, got {v}")))
    }
}

impl RunConfig {
    /// Parses and validates; errors carry the dotted path of the field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { "<root>".into() } else { path }, e.inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate().map_err(field_err("topology"))?;
        let m = self.topology.m;
        match &self.problem {
            ProblemConfig::Gaussian { n, beta, .. } => {
                if *n < 2 {
                    return Err(Error::config("problem.n", format!("need at least 2 grid points, got {n}")));
                }
                positive("problem.beta", *beta)?;
            }
            ProblemConfig::Quadratic { n, mu, .. } => {
                if *n == 0 {
                    return Err(Error::config("problem.n", "block dimension must be positive"));
                }
                positive("problem.mu", *mu)?;
            }
            ProblemConfig::Discrete {
                beta, support, measures, ..
            } => {
                positive("problem.beta", *beta)?;
                if support.n < 2 || !(support.max > support.min) {
                    return Err(Error::config("problem.support", "need n >= 2 and max > min"));
                }
                if measures.len() != 1 && measures.len() != m {
                    return Err(Error::config(
                        "problem.measures",
                        format!("give one measure or one per node ({m}), got {}", measures.len()),
                    ));
                }
                for (i, spec) in measures.iter().enumerate() {
                    let atoms: Vec<Vec<f64>> = spec.atoms.iter().map(|a| vec![*a]).collect();
                    DiscreteMeasure::new(&atoms, spec.weights.clone())
                        .map_err(field_err(&format!("problem.measures[{i}]")))?;
                }
            }
            ProblemConfig::Mnist {
                beta,
                manifest,
                images,
                labels,
                digit,
                ..
            } => {
                positive("problem.beta", *beta)?;
                let raw = images.is_some() && labels.is_some() && digit.is_some();
                if manifest.is_some() == raw {
                    return Err(Error::config(
                        "problem",
                        "mnist needs either `manifest` or all of `images`, `labels`, `digit`",
                    ));
                }
                if digit.is_some_and(|d| d > 9) {
                    return Err(Error::config("problem.digit", "digit must be 0..=9"));
                }
            }
        }

        if let AutoOr::Value(g) = self.algorithm.gamma {
            positive("algorithm.gamma", g)?;
        }
        if let Some(tau) = self.algorithm.tau_assumed {
            if tau > m {
                return Err(Error::config(
                    "algorithm.tau_assumed",
                    format!("{tau} exceeds m = {m}; the convergence guarantee behind auto gamma assumes tau <= m"),
                ));
            }
        }
        if self.algorithm.batch == AutoOr::Value(0) {
            return Err(Error::config("algorithm.batch", "batch size must be at least 1"));
        }
        positive("algorithm.epsilon", self.algorithm.epsilon)?;

        if !(self.sim.horizon_s >= 0.0 && self.sim.horizon_s.is_finite()) {
            return Err(Error::config("sim.horizon_s", format!("must be >= 0, got {}", self.sim.horizon_s)));
        }
        positive("sim.activation.interval_s", self.sim.activation.interval_s)?;
        self.sim.delay.validate().map_err(field_err("sim.delay"))?;
        positive("eval.eval_every_s", self.eval.eval_every_s)?;
        if self.eval.eval_samples == 0 {
            return Err(Error::config("eval.eval_samples", "need at least one sample"));
        }
        Ok(())
    }

    /// Default staleness bound for auto gamma: activations that fit in the
    /// longest delay, capped at `m`.
    pub fn tau_assumed(&self) -> usize {
        self.algorithm.tau_assumed.unwrap_or_else(|| {
            let ticks = (self.sim.delay.max_delay() / self.sim.activation.interval_s - 1e-9).ceil();
            (ticks.max(0.0) as usize).min(self.topology.m)
        })
    }

    /// Builds graph, objective and simulator settings.
    pub fn prepare(&self) -> Result<PreparedRun> {
        self.validate()?;
        let graph = build_topology(&self.topology).map_err(field_err("topology"))?;
        let objective = self.objective(&graph)?;
        let lambda_max = topology::lambda_max(&topology::laplacian(&graph), 1e-10)?;
        let smoothness = lambda_max / objective.modulus();
        let gamma = match self.algorithm.gamma {
            AutoOr::Value(g) => g,
            AutoOr::Auto => step_size(smoothness, self.tau_assumed(), graph.num_nodes())
                .map_err(field_err("algorithm.tau_assumed"))?,
        };
        let batch = match self.algorithm.batch {
            AutoOr::Value(b) => BatchRule::Fixed(b),
            AutoOr::Auto => BatchRule::Schedule {
                epsilon: self.algorithm.epsilon,
            },
        };
        let sim = SimConfig {
            variant: self.algorithm.variant,
            horizon_s: self.sim.horizon_s,
            activation_mode: self.sim.activation.mode,
            interval_s: self.sim.activation.interval_s,
            comm: self.sim.delay.clone(),
            master_seed: self.sim.master_seed,
            gamma,
            batch,
            eval: EvalConfig {
                every_s: self.eval.eval_every_s,
                samples: self.eval.eval_samples,
                seed: self.eval.eval_seed,
            },
            topology_label: self.topology.kind.as_str().to_string(),
        };
        Ok(PreparedRun {
            graph,
            objective,
            sim,
            lambda_max,
        })
    }

    fn objective(&self, graph: &Graph) -> Result<NodeObjective> {
        let m = graph.num_nodes();
        let reg = |beta: f64, constant: bool| -> Result<RegularizationConfig> {
            let mut r = RegularizationConfig::new(beta)?;
            r.include_entropy_constant = constant;
            Ok(r)
        };
        match &self.problem {
            ProblemConfig::Gaussian {
                n,
                beta,
                seed,
                include_entropy_constant,
            } => {
                let preset = experiments::gaussian_preset(m, *n, *seed)?;
                Ok(NodeObjective::Transport {
                    measures: preset.measures()?,
                    grid: preset.grid,
                    reg: reg(*beta, *include_entropy_constant)?,
                })
            }
            ProblemConfig::Quadratic { n, mu, seed } => {
                Ok(experiments::quadratic_preset(m, *n, *mu, *seed)?.objective())
            }
            ProblemConfig::Discrete {
                beta,
                support,
                measures,
                include_entropy_constant,
            } => {
                let specs: Vec<Measure> = measures
                    .iter()
                    .map(|s| {
                        let atoms: Vec<Vec<f64>> = s.atoms.iter().map(|a| vec![*a]).collect();
                        DiscreteMeasure::new(&atoms, s.weights.clone()).map(Measure::Discrete)
                    })
                    .collect::<Result<_>>()?;
                let measures = if specs.len() == 1 { vec![specs[0].clone(); m] } else { specs };
                Ok(NodeObjective::Transport {
                    measures,
                    grid: SupportGrid::linspace(support.min, support.max, support.n)?,
                    reg: reg(*beta, *include_entropy_constant)?,
                })
            }
            ProblemConfig::Mnist {
                beta,
                manifest,
                images,
                labels,
                digit,
                seed,
                prune_zero,
                include_entropy_constant,
            } => {
                let man = match manifest {
                    Some(path) => {
                        let text = std::fs::read_to_string(path).map_err(|e| {
                            Error::config("problem.manifest", format!("{}: {e}", path.display()))
                        })?;
                        serde_json::from_str::<mnist::MeasureManifest>(&text)
                            .map_err(|e| Error::config("problem.manifest", e.to_string()))?
                    }
                    None => {
                        let read = |field: &str, p: &Path| {
                            std::fs::read(p).map_err(|e| Error::config(field, format!("{}: {e}", p.display())))
                        };
                        let img = mnist::parse_idx_images(&read(
                            "problem.images",
                            images.as_deref().expect("validated"),
                        )?)
                        .map_err(field_err("problem.images"))?;
                        let lab = mnist::parse_idx_labels(&read(
                            "problem.labels",
                            labels.as_deref().expect("validated"),
                        )?)
                        .map_err(field_err("problem.labels"))?;
                        mnist::prepare_manifest(&img, &lab, digit.expect("validated"), m, *seed, *prune_zero)
                            .map_err(field_err("problem"))?
                    }
                };
                if man.measures.len() != m {
                    return Err(Error::config(
                        "problem.manifest",
                        format!("{} measures for {m} nodes", man.measures.len()),
                    ));
                }
                Ok(NodeObjective::Transport {
                    measures: man.measures.iter().map(|p| p.to_measure()).collect::<Result<_>>()?,
                    grid: mnist::pixel_grid(man.rows, man.cols)?,
                    reg: reg(*beta, *include_entropy_constant)?,
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetKind {
    Gaussian,
    Quadratic,
    Mnist,
}

impl fmt::Display for PresetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PresetKind::Gaussian => "gaussian",
            PresetKind::Quadratic => "quadratic",
            PresetKind::Mnist => "mnist",
        })
    }
}

/// Filled config at desk scale.
///
/// Transport presets space activations `0.2/m` seconds apart, so every node
/// is activated once per 0.2 s on average; the quadratic preset uses 0.2 s
/// ticks. `γ` is a tenth of `1/L`, shared by all variants.
pub fn preset(kind: PresetKind, topology: TopologySpec) -> Result<RunConfig> {
    topology.validate()?;
    let m = topology.m;
    let graph = build_topology(&topology)?;
    let lambda_max = topology::lambda_max(&topology::laplacian(&graph), 1e-10)?;
    let per_node = 0.2 / m as f64;
    let (problem, modulus, horizon_s, interval_s) = match kind {
        PresetKind::Gaussian => (
            ProblemConfig::Gaussian {
                n: 50,
                beta: 1.0,
                seed: 0,
                include_entropy_constant: false,
            },
            1.0,
            200.0,
            per_node,
        ),
        // Exact gradients have no noise to damp momentum, so keep the delay
        // within m activations.
        PresetKind::Quadratic => (ProblemConfig::Quadratic { n: 4, mu: 1.0, seed: 0 }, 1.0, 100.0, 0.2),
        PresetKind::Mnist => (
            ProblemConfig::Mnist {
                beta: 0.01,
                manifest: Some(PathBuf::from("manifest.json")),
                images: None,
                labels: None,
                digit: None,
                seed: 0,
                prune_zero: true,
                include_entropy_constant: false,
            },
            0.01,
            50.0,
            per_node,
        ),
    };
    Ok(RunConfig {
        topology,
        problem,
        algorithm: AlgorithmConfig {
            variant: AlgorithmVariant::A2dwb,
            gamma: AutoOr::Value(0.1 * modulus / lambda_max),
            tau_assumed: None,
            batch: AutoOr::Value(10),
            epsilon: default_epsilon(),
        },
        sim: SimBlock {
            horizon_s,
            activation: ActivationConfig {
                mode: ActivationMode::Permutation,
                interval_s,
            },
            delay: CommModel::default(),
            master_seed: 0,
        },
        eval: EvalBlock::default(),
    })
}
