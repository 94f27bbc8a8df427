//! Metrics, presets and trace output.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::blocks::Blocks;
use crate::error::{Error, Result};
use crate::rng::{self, Domain};
use crate::sim::NodeObjective;
use crate::topology::{self, Graph};
use crate::transport::{self, Measure, RegularizationConfig, SupportGrid};

/// Column names of the trace CSV, in order.
pub const TRACE_COLUMNS: [&str; 7] = [
    "virtual_time_s",
    "global_iter",
    "algorithm",
    "topology",
    "seed",
    "dual_objective",
    "consensus_distance",
];

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub virtual_time_s: f64,
    pub global_iter: u64,
    pub algorithm: String,
    pub topology: String,
    pub seed: u64,
    pub dual_objective: f64,
    pub consensus_distance: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn first(&self) -> Option<&TraceRow> {
        self.rows.first()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn is_time_ordered(&self) -> bool {
        self.rows.windows(2).all(|w| w[0].virtual_time_s <= w[1].virtual_time_s)
    }
}

/// `{:.16e}`: 17 significant digits, enough to round-trip any `f64`.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(trace: &Trace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_COLUMNS)?;
    for r in &trace.rows {
        w.write_record([
            fmt_f64(r.virtual_time_s),
            r.global_iter.to_string(),
            r.algorithm.clone(),
            r.topology.clone(),
            r.seed.to_string(),
            fmt_f64(r.dual_objective),
            fmt_f64(r.consensus_distance),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(trace, std::io::BufWriter::new(file))
}

pub fn parse_csv<R: Read>(input: R) -> Result<Trace> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != TRACE_COLUMNS {
        return Err(Error::Format(format!("unexpected trace header {header:?}")));
    }
    let field = |rec: &csv::StringRecord, i: usize| rec.get(i).unwrap_or_default().to_string();
    let num = |rec: &csv::StringRecord, i: usize| -> Result<f64> {
        rec.get(i)
            .unwrap_or_default()
            .parse()
            .map_err(|e| Error::Format(format!("column {}: {e}", TRACE_COLUMNS[i])))
    };
    let int = |rec: &csv::StringRecord, i: usize| -> Result<u64> {
        rec.get(i)
            .unwrap_or_default()
            .parse()
            .map_err(|e| Error::Format(format!("column {}: {e}", TRACE_COLUMNS[i])))
    };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push(TraceRow {
            virtual_time_s: num(&rec, 0)?,
            global_iter: int(&rec, 1)?,
            algorithm: field(&rec, 2),
            topology: field(&rec, 3),
            seed: int(&rec, 4)?,
            dual_objective: num(&rec, 5)?,
            consensus_distance: num(&rec, 6)?,
        });
    }
    Ok(Trace { rows })
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Trace> {
    parse_csv(std::fs::File::open(path)?)
}

/// `M`-sample average of softmax draws at `η`.
///
/// The stream depends on `eval_seed` only: every snapshot and every node
/// draws the same underlying variates, so nodes holding equal measures and
/// equal potentials report equal estimates.
pub fn primal_estimate(
    eta: &[f64],
    mu: &Measure,
    grid: &SupportGrid,
    beta: f64,
    samples: usize,
    eval_seed: u64,
) -> Result<Vec<f64>> {
    let mut stream = rng::keyed(eval_seed, Domain::Evaluation, 0, 1);
    Ok(transport::stochastic_grad(mu, grid, eta, beta, samples, &mut stream)?.mean_gradient)
}

/// `Σ_{(i,j)∈E} ‖p_i − p_j‖²`.
pub fn consensus_distance(graph: &Graph, snapshot: &Blocks) -> Result<f64> {
    topology::consensus_quadratic(graph, snapshot)
}

/// Removes the node average: the orthogonal projection onto `range(W ⊗ I)`
/// for a connected graph.
///
/// Asynchronous updates let `Σ_i η̄_i` drift away from zero, and the dual
/// objective is only defined on the range of `√W`. Evaluating at the
/// projection is evaluating at the least-squares preimage `η = (√W)⁺η̄`.
pub fn project_to_range(eta_bar: &Blocks) -> Blocks {
    let m = eta_bar.num_blocks();
    let n = eta_bar.block_dim();
    let mut mean = vec![0.0; n];
    for row in eta_bar.rows() {
        for (a, v) in mean.iter_mut().zip(row) {
            *a += v;
        }
    }
    mean.iter_mut().for_each(|a| *a /= m as f64);
    let mut out = eta_bar.clone();
    for i in 0..m {
        for (v, a) in out.block_mut(i).iter_mut().zip(&mean) {
            *v -= a;
        }
    }
    out
}

/// Per-node Gaussians on a shared uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPreset {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub grid: SupportGrid,
}

pub const GAUSSIAN_MEAN_RANGE: (f64, f64) = (-4.0, 4.0);
pub const GAUSSIAN_STD_RANGE: (f64, f64) = (0.1, 0.6);
pub const GAUSSIAN_SUPPORT: (f64, f64) = (-5.0, 5.0);

/// Means uniform on `[−4, 4]`, deviations uniform on `[0.1, 0.6]`, support
/// `n` points evenly spaced on `[−5, 5]`.
pub fn gaussian_preset(m: usize, n: usize, seed: u64) -> Result<GaussianPreset> {
    if m < 2 || n < 2 {
        return Err(Error::arg(format!("gaussian preset needs m >= 2 and n >= 2, got m = {m}, n = {n}")));
    }
    let mut means = Vec::with_capacity(m);
    let mut stds = Vec::with_capacity(m);
    for i in 0..m {
        let mut s = rng::keyed(seed, Domain::Preset, i as u64, 1);
        means.push(s.random_range(GAUSSIAN_MEAN_RANGE.0..=GAUSSIAN_MEAN_RANGE.1));
        stds.push(s.random_range(GAUSSIAN_STD_RANGE.0..=GAUSSIAN_STD_RANGE.1));
    }
    Ok(GaussianPreset {
        means,
        stds,
        grid: SupportGrid::linspace(GAUSSIAN_SUPPORT.0, GAUSSIAN_SUPPORT.1, n)?,
    })
}

impl GaussianPreset {
    pub fn measures(&self) -> Result<Vec<Measure>> {
        self.means.iter().zip(&self.stds).map(|(&a, &s)| Measure::gaussian(a, s)).collect()
    }

    pub fn objective(&self, beta: f64) -> Result<NodeObjective> {
        Ok(NodeObjective::Transport {
            measures: self.measures()?,
            grid: self.grid.clone(),
            reg: RegularizationConfig::new(beta)?,
        })
    }
}

/// Quadratic diagnostic problem with centred targets (`Σ_i b_i = 0`).
///
/// Centring makes `φ* = −(μ/2)Σ‖b_i‖²` a lower bound of `Σ_i W*_i(η̄_i)` for
/// every `η̄`, not only on the consensus-compatible subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticPreset {
    pub targets: Blocks,
    pub mu: f64,
}

pub fn quadratic_preset(m: usize, n: usize, mu: f64, seed: u64) -> Result<QuadraticPreset> {
    if m == 0 || n == 0 {
        return Err(Error::arg("quadratic preset needs m >= 1 and n >= 1"));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::arg(format!("mu must be positive, got {mu}")));
    }
    let mut targets = Blocks::zeros(m, n);
    let mut s = rng::keyed(seed, Domain::Preset, 0, 2);
    for v in targets.as_mut_slice() {
        *v = StandardNormal.sample(&mut s);
    }
    for l in 0..n {
        let mean = (0..m).map(|i| targets[(i, l)]).sum::<f64>() / m as f64;
        for i in 0..m {
            targets[(i, l)] -= mean;
        }
    }
    Ok(QuadraticPreset { targets, mu })
}

impl QuadraticPreset {
    pub fn objective(&self) -> NodeObjective {
        NodeObjective::Quadratic {
            targets: self.targets.clone(),
            mu: self.mu,
        }
    }

    pub fn optimal_value(&self) -> f64 {
        -0.5 * self.mu * self.targets.norm_sq()
    }

    /// `x_i = b_i + η̄_i/μ`.
    pub fn primal(&self, eta_bar: &Blocks) -> Blocks {
        self.targets.axpy(1.0 / self.mu, eta_bar)
    }

    /// `Σ_i W*_i(η̄_i)`.
    pub fn dual_value(&self, eta_bar: &Blocks) -> f64 {
        eta_bar.norm_sq() / (2.0 * self.mu) + eta_bar.dot(&self.targets)
    }
}

/// `m` copies of one discrete measure on a uniform 1-D grid.
pub fn identical_measures(m: usize, measure: &Measure, grid: SupportGrid, beta: f64) -> Result<NodeObjective> {
    Ok(NodeObjective::Transport {
        measures: vec![measure.clone(); m],
        grid,
        reg: RegularizationConfig::new(beta)?,
    })
}

/// Median of a non-empty slice of comparable values.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() || values.iter().any(|v| v.is_nan()) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) })
}
