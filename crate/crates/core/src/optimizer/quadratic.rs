//! Synthetic quadratic consensus problem with closed-form dual.
//!
//! Primal: `F(x) = ½μ‖x − b‖²` subject to `√W x = 0`. Dual:
//! `φ(η) = (1/2μ)‖√Wη‖² + ⟨√Wη, b⟩` with primal map `x*(√Wη) = b + √Wη/μ`
//! and gradient `∇φ(η) = √W x*`. The optimum has every block equal to the
//! block mean `b̄`, and `φ* = −(μ/2) Σ_i ‖b_i − b̄‖²`.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use super::StochasticOracle;
use crate::blocks::Blocks;
use crate::error::{Error, Result};
use crate::rng::{self, Domain};
use crate::topology::{self, Graph, Laplacian};

#[derive(Debug, Clone)]
pub struct QuadraticConsensusProblem {
    graph: Graph,
    laplacian: Laplacian,
    sqrt_laplacian: DMatrix<f64>,
    lambda_max: f64,
    mu: f64,
    target: Blocks,
    sqrt_target: Blocks,
}

/// Closed-form dual quantities at one point.
#[derive(Debug, Clone)]
pub struct QuadraticEval {
    pub value: f64,
    pub gradient: Blocks,
    pub primal: Blocks,
}

impl QuadraticConsensusProblem {
    pub fn new(graph: Graph, mu: f64, target: Blocks) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::arg(format!("strong convexity modulus must be positive, got {mu}")));
        }
        if target.num_blocks() != graph.num_nodes() {
            return Err(Error::arg(format!(
                "target has {} blocks for a {}-node graph",
                target.num_blocks(),
                graph.num_nodes()
            )));
        }
        let laplacian = topology::laplacian(&graph);
        let sqrt_laplacian = topology::sqrt_laplacian(&laplacian)?;
        let lambda_max = topology::lambda_max(&laplacian, 1e-12)?;
        let sqrt_target = target.kron_apply(&sqrt_laplacian);
        Ok(Self {
            graph,
            laplacian,
            sqrt_laplacian,
            lambda_max,
            mu,
            target,
            sqrt_target,
        })
    }

    /// Target blocks with i.i.d. standard normal entries.
    pub fn random(graph: Graph, mu: f64, n: usize, seed: u64) -> Result<Self> {
        let m = graph.num_nodes();
        let mut target = Blocks::zeros(m, n);
        let mut stream = rng::keyed(seed, Domain::Preset, 0, 0);
        for v in target.as_mut_slice() {
            *v = StandardNormal.sample(&mut stream);
        }
        Self::new(graph, mu, target)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn laplacian(&self) -> &Laplacian {
        &self.laplacian
    }

    pub fn sqrt_laplacian(&self) -> &DMatrix<f64> {
        &self.sqrt_laplacian
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn target(&self) -> &Blocks {
        &self.target
    }

    pub fn num_blocks(&self) -> usize {
        self.target.num_blocks()
    }

    pub fn block_dim(&self) -> usize {
        self.target.block_dim()
    }

    /// `L = λ_max(W)/μ`.
    pub fn smoothness(&self) -> f64 {
        self.lambda_max / self.mu
    }

    fn target_mean(&self) -> Vec<f64> {
        let m = self.num_blocks() as f64;
        let mut mean = vec![0.0; self.block_dim()];
        for row in self.target.rows() {
            for (a, v) in mean.iter_mut().zip(row) {
                *a += v / m;
            }
        }
        mean
    }

    pub fn optimal_value(&self) -> f64 {
        let mean = self.target_mean();
        let spread: f64 = self
            .target
            .rows()
            .map(|row| row.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .sum();
        -0.5 * self.mu * spread
    }

    pub fn optimal_primal(&self) -> Blocks {
        let mean = self.target_mean();
        Blocks::from_rows(&vec![mean; self.num_blocks()]).expect("uniform rows")
    }

    /// `φ`, `∇φ` and `x*` through the explicit matrix square root.
    pub fn dual_eval(&self, eta: &Blocks) -> Result<QuadraticEval> {
        self.check(eta)?;
        let y = eta.kron_apply(&self.sqrt_laplacian);
        let primal = self.target.axpy(1.0 / self.mu, &y);
        let value = y.norm_sq() / (2.0 * self.mu) + y.dot(&self.target);
        let gradient = primal.kron_apply(&self.sqrt_laplacian);
        Ok(QuadraticEval {
            value,
            gradient,
            primal,
        })
    }

    /// `φ(η)` from the Laplacian quadratic form, without `√W`.
    pub fn value(&self, eta: &Blocks) -> f64 {
        let quad = topology::consensus_quadratic(&self.graph, eta).expect("shape checked");
        quad / (2.0 * self.mu) + eta.dot(&self.sqrt_target)
    }

    /// `[∇φ(η)]^{[i]} = [√W b]_i + [Wη]_i/μ`, touching only `i`'s neighbours.
    pub fn partial_gradient(&self, eta: &Blocks, i: usize) -> Vec<f64> {
        let deg = self.graph.degree(i) as f64;
        let mut g: Vec<f64> = eta.block(i).iter().map(|v| deg * v).collect();
        for &j in self.graph.neighbors(i) {
            for (a, v) in g.iter_mut().zip(eta.block(j)) {
                *a -= v;
            }
        }
        for (a, s) in g.iter_mut().zip(self.sqrt_target.block(i)) {
            *a = *a / self.mu + s;
        }
        g
    }

    fn check(&self, eta: &Blocks) -> Result<()> {
        if eta.num_blocks() != self.num_blocks() || eta.block_dim() != self.block_dim() {
            return Err(Error::arg(format!(
                "expected {}x{} blocks, got {}x{}",
                self.num_blocks(),
                self.block_dim(),
                eta.num_blocks(),
                eta.block_dim()
            )));
        }
        Ok(())
    }

    /// Exact oracle (no noise).
    pub fn oracle(&self) -> QuadraticOracle<'_> {
        QuadraticOracle {
            problem: self,
            noise_std: 0.0,
            seed: 0,
        }
    }

    /// Oracle adding i.i.d. `N(0, noise_std²)` noise to each gradient entry.
    pub fn noisy_oracle(&self, noise_std: f64, seed: u64) -> QuadraticOracle<'_> {
        QuadraticOracle {
            problem: self,
            noise_std,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadraticOracle<'a> {
    problem: &'a QuadraticConsensusProblem,
    noise_std: f64,
    seed: u64,
}

impl StochasticOracle for QuadraticOracle<'_> {
    fn num_blocks(&self) -> usize {
        self.problem.num_blocks()
    }

    fn block_dim(&self) -> usize {
        self.problem.block_dim()
    }

    fn partial_gradient(&self, point: &Blocks, block: usize, sample: u64) -> Vec<f64> {
        let mut g = self.problem.partial_gradient(point, block);
        if self.noise_std > 0.0 {
            let mut stream = rng::keyed(self.seed, Domain::OracleNoise, sample, block as u64);
            for v in &mut g {
                let z: f64 = StandardNormal.sample(&mut stream);
                *v += self.noise_std * z;
            }
        }
        g
    }

    fn value(&self, point: &Blocks) -> Option<f64> {
        Some(self.problem.value(point))
    }

    fn variance_proxy(&self) -> f64 {
        self.noise_std * self.noise_std * (self.num_blocks() * self.block_dim()) as f64
    }

    fn smoothness(&self) -> f64 {
        self.problem.smoothness()
    }
}
