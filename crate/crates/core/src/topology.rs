//! Network topologies, graph Laplacians and spectral utilities.
//!
//! The Laplacian is kept as a dense `m × m` matrix. Node variables are
//! stacked [`Blocks`] and every network-level product works blockwise, so the
//! `mn × mn` Kronecker matrix `W = L ⊗ I_n` is never materialised.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::blocks::Blocks;
use crate::error::{Error, Result};
use crate::rng::{self, Domain};

/// Resampling budget for Erdős–Rényi graphs that come out disconnected.
pub const ER_MAX_ATTEMPTS: u64 = 100;

/// Matrices at or below this size use a dense symmetric eigensolver.
pub const DENSE_EIGEN_LIMIT: usize = 1000;

const POWER_ITER_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Complete,
    ErdosRenyi,
    Cycle,
    Star,
}

impl TopologyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TopologyKind::Complete => "complete",
            TopologyKind::ErdosRenyi => "erdos_renyi",
            TopologyKind::Cycle => "cycle",
            TopologyKind::Star => "star",
        }
    }
}

/// Description of a topology as it appears in the run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub kind: TopologyKind,
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub er_edge_prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl TopologySpec {
    pub fn new(kind: TopologyKind, m: usize) -> Self {
        Self {
            kind,
            m,
            er_edge_prob: None,
            seed: None,
        }
    }

    pub fn erdos_renyi(m: usize, p: f64, seed: u64) -> Self {
        Self {
            kind: TopologyKind::ErdosRenyi,
            m,
            er_edge_prob: Some(p),
            seed: Some(seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::arg(format!("topology needs m >= 2, got {}", self.m)));
        }
        match (self.kind, self.er_edge_prob) {
            (TopologyKind::ErdosRenyi, Some(p)) if p > 0.0 && p <= 1.0 => Ok(()),
            (TopologyKind::ErdosRenyi, Some(p)) => Err(Error::arg(format!(
                "er_edge_prob must lie in (0, 1], got {p}"
            ))),
            (TopologyKind::ErdosRenyi, None) => {
                Err(Error::arg("erdos_renyi topology requires er_edge_prob"))
            }
            (_, Some(_)) => Err(Error::arg("er_edge_prob is only valid for erdos_renyi")),
            (_, None) => Ok(()),
        }
    }
}

/// Undirected, loop-free, connected graph with sorted neighbour lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from an undirected edge list, rejecting self-loops,
    /// out-of-range endpoints and disconnected results.
    pub fn from_edges(m: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); m];
        for &(a, b) in edges {
            if a >= m || b >= m {
                return Err(Error::arg(format!("edge ({a}, {b}) out of range for m = {m}")));
            }
            if a == b {
                return Err(Error::arg(format!("self-loop at node {a}")));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        let g = Graph { adjacency };
        if !g.is_connected() {
            return Err(Error::Construction("graph is disconnected".into()));
        }
        Ok(g)
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    /// Each undirected edge once, as `(i, j)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Breadth-first reachability from node 0.
    pub fn is_connected(&self) -> bool {
        let m = self.num_nodes();
        if m == 0 {
            return false;
        }
        let mut seen = vec![false; m];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for &j in &self.adjacency[i] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count == m
    }
}

/// Builds the topology described by `spec`.
///
/// Erdős–Rényi graphs are resampled with sub-seed `attempt = 0, 1, …` until
/// connected; after [`ER_MAX_ATTEMPTS`] failures a construction error is
/// returned.
pub fn build_topology(spec: &TopologySpec) -> Result<Graph> {
    spec.validate()?;
    let m = spec.m;
    match spec.kind {
        TopologyKind::Complete => {
            let edges: Vec<_> = (0..m)
                .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
                .collect();
            Graph::from_edges(m, &edges)
        }
        TopologyKind::Cycle => {
            let edges: Vec<_> = (0..m).map(|i| (i, (i + 1) % m)).collect();
            Graph::from_edges(m, &edges)
        }
        TopologyKind::Star => {
            let edges: Vec<_> = (1..m).map(|i| (0, i)).collect();
            Graph::from_edges(m, &edges)
        }
        TopologyKind::ErdosRenyi => {
            let p = spec.er_edge_prob.expect("validated");
            let seed = spec.seed.unwrap_or(0);
            for attempt in 0..ER_MAX_ATTEMPTS {
                let mut stream = rng::keyed(seed, Domain::Topology, attempt, 0);
                let mut edges = Vec::new();
                for i in 0..m {
                    for j in i + 1..m {
                        if stream.random::<f64>() < p {
                            edges.push((i, j));
                        }
                    }
                }
                match Graph::from_edges(m, &edges) {
                    Ok(g) => return Ok(g),
                    Err(Error::Construction(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(Error::Construction(format!(
                "erdos_renyi(m = {m}, p = {p}) still disconnected after {ER_MAX_ATTEMPTS} attempts"
            )))
        }
    }
}

/// Dense graph Laplacian `L = D − A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian(DMatrix<f64>);

impl Laplacian {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Wraps an arbitrary symmetric matrix. Used for test-scale experiments
    /// with hypothetical operators (e.g. the zero matrix).
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::arg("Laplacian must be square"));
        }
        if (matrix.clone() - matrix.transpose()).amax() > 0.0 {
            return Err(Error::arg("Laplacian must be symmetric"));
        }
        Ok(Laplacian(matrix))
    }
}

pub fn laplacian(g: &Graph) -> Laplacian {
    let m = g.num_nodes();
    let mut l = DMatrix::zeros(m, m);
    for i in 0..m {
        l[(i, i)] = g.degree(i) as f64;
        for &j in g.neighbors(i) {
            l[(i, j)] = -1.0;
        }
    }
    Laplacian(l)
}

/// Spectral data computed once per run.
#[derive(Debug, Clone)]
pub struct SpectralInfo {
    pub lambda_max: f64,
    pub sqrt_laplacian: Option<DMatrix<f64>>,
}

impl SpectralInfo {
    /// `λ_max` always; `√L` only when `m` is within the dense limit.
    pub fn compute(l: &Laplacian) -> Result<Self> {
        let lambda_max = lambda_max(l, 1e-10)?;
        let sqrt_laplacian = if l.dim() <= DENSE_EIGEN_LIMIT {
            Some(sqrt_laplacian(l)?)
        } else {
            None
        };
        Ok(Self {
            lambda_max,
            sqrt_laplacian,
        })
    }
}

/// Largest eigenvalue of a symmetric PSD matrix.
///
/// Dense symmetric eigensolve up to [`DENSE_EIGEN_LIMIT`], power iteration
/// above it.
pub fn lambda_max(l: &Laplacian, tol: f64) -> Result<f64> {
    if l.dim() <= DENSE_EIGEN_LIMIT {
        let eig = SymmetricEigen::new(l.0.clone());
        Ok(eig.eigenvalues.iter().copied().fold(0.0, f64::max))
    } else {
        power_iteration(l, tol)
    }
}

/// Power iteration for the top eigenvalue of a PSD matrix. Stops once the
/// Rayleigh quotient changes by less than `tol` relative.
pub fn power_iteration(l: &Laplacian, tol: f64) -> Result<f64> {
    let m = l.dim();
    if m == 0 {
        return Ok(0.0);
    }
    let mut stream = rng::keyed(0, Domain::Topology, u64::MAX, m as u64);
    let mut x = DVector::from_fn(m, |_, _| stream.random::<f64>() - 0.5);
    let norm = x.norm();
    if norm == 0.0 {
        return Err(Error::Numeric("degenerate power-iteration start".into()));
    }
    x /= norm;
    let mut estimate = 0.0;
    for _ in 0..POWER_ITER_CAP {
        let y = &l.0 * &x;
        let next = x.dot(&y);
        let ny = y.norm();
        if ny == 0.0 {
            return Ok(0.0);
        }
        x = y / ny;
        if (next - estimate).abs() <= tol * next.abs().max(f64::MIN_POSITIVE) {
            return Ok(next);
        }
        estimate = next;
    }
    Err(Error::Numeric(format!(
        "power iteration did not reach tolerance {tol} in {POWER_ITER_CAP} iterations"
    )))
}

/// Symmetric PSD square root via eigendecomposition. Eigenvalues in
/// `[-1e-10, 0)` are clamped to zero; anything more negative is an error.
/// Eigenvalues below `1e-12·λ_max` are treated as exact zeros, so the
/// constant vector stays in the kernel of the result.
pub fn sqrt_laplacian(l: &Laplacian) -> Result<DMatrix<f64>> {
    if l.dim() > DENSE_EIGEN_LIMIT {
        return Err(Error::arg(format!(
            "sqrt_laplacian is limited to m <= {DENSE_EIGEN_LIMIT}"
        )));
    }
    let eig = SymmetricEigen::new(l.0.clone());
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let mut roots = eig.eigenvalues.clone();
    for v in roots.iter_mut() {
        if *v < -1e-10 {
            return Err(Error::Numeric(format!("matrix is not PSD: eigenvalue {v}")));
        }
        // √(1e-16) = 1e-8 would otherwise leak into the null direction.
        *v = if *v > 1e-12 * top { v.sqrt() } else { 0.0 };
    }
    let q = &eig.eigenvectors;
    let s = q * DMatrix::from_diagonal(&roots) * q.transpose();
    // Symmetrise away rounding asymmetry.
    Ok((&s + s.transpose()) * 0.5)
}

/// `Σ_{(i,j) ∈ E} ‖x_i − x_j‖²`, i.e. `xᵀ(L ⊗ I)x = ‖√W x‖²`.
pub fn consensus_quadratic(g: &Graph, x: &Blocks) -> Result<f64> {
    if x.num_blocks() != g.num_nodes() {
        return Err(Error::arg(format!(
            "expected {} blocks, got {}",
            g.num_nodes(),
            x.num_blocks()
        )));
    }
    Ok(g.edges()
        .map(|(i, j)| {
            x.block(i)
                .iter()
                .zip(x.block(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum())
}

/// `(L ⊗ I) x` from adjacency lists.
pub fn laplacian_apply(g: &Graph, x: &Blocks) -> Blocks {
    let mut out = Blocks::zeros(x.num_blocks(), x.block_dim());
    for i in 0..g.num_nodes() {
        let deg = g.degree(i) as f64;
        let dst = out.block_mut(i);
        for (d, s) in dst.iter_mut().zip(x.block(i)) {
            *d = deg * s;
        }
        for &j in g.neighbors(i) {
            for (d, s) in dst.iter_mut().zip(x.block(j)) {
                *d -= s;
            }
        }
    }
    out
}
