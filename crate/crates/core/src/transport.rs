//! Semi-discrete entropic transport dual.
//!
//! A node holds a measure `μ` it can sample from and a dual potential
//! `η ∈ ℝⁿ` over a fixed support `z_1, …, z_n`. For a sample `y ∼ μ` the
//! primal weight vector is the softmax
//!
//! ```text
//! p(η)_l = exp((η_l − c_l(y)) / β) / Σ_l' exp((η_l' − c_l'(y)) / β)
//! ```
//!
//! and the dual function is `E_y β log Σ_l exp((η_l − c_l(y)) / β)` (plus an
//! optional `η`-independent entropy constant). Its gradient is `E_y p(η)`, so
//! averaging `M` softmax draws gives an unbiased stochastic gradient, and the
//! gradient itself is the node's estimate of the barycenter weights.
//!
//! All exponentials go through max-subtracted log-sum-exp, so `β` down to
//! `1e-3` with costs of order 100 never overflows.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Fixed barycenter support `z_1, …, z_n ⊂ ℝᵈ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportGrid {
    dim: usize,
    coords: Vec<f64>,
}

impl SupportGrid {
    /// Builds a grid from explicit points, rejecting duplicates.
    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        if points.is_empty() || dim == 0 {
            return Err(Error::arg("support grid needs at least one point of dimension >= 1"));
        }
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::arg("support points must share one dimension"));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::arg("support points must be finite"));
        }
        let mut sorted: Vec<&Vec<f64>> = points.iter().collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::arg("support points must be pairwise distinct"));
        }
        Ok(Self {
            dim,
            coords: points.concat(),
        })
    }

    /// `n` equally spaced points on `[min, max]`, endpoints included.
    pub fn linspace(min: f64, max: f64, n: usize) -> Result<Self> {
        if n == 0 || !(min.is_finite() && max.is_finite()) {
            return Err(Error::arg("linspace needs n >= 1 and finite bounds"));
        }
        if n > 1 && min >= max {
            return Err(Error::arg(format!("linspace needs min < max, got [{min}, {max}]")));
        }
        let coords = if n == 1 {
            vec![min]
        } else {
            let step = (max - min) / (n - 1) as f64;
            (0..n).map(|l| min + step * l as f64).collect()
        };
        Ok(Self { dim: 1, coords })
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, l: usize) -> &[f64] {
        &self.coords[l * self.dim..(l + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks(self.dim)
    }
}

/// Transport cost `‖z − y‖^power`. The default power 2 is squared Euclidean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cost {
    pub power: f64,
}

impl Default for Cost {
    fn default() -> Self {
        Cost { power: 2.0 }
    }
}

impl Cost {
    fn eval(&self, z: &[f64], y: &[f64]) -> f64 {
        let sq: f64 = z.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        if self.power == 2.0 {
            sq
        } else {
            sq.powf(self.power / 2.0)
        }
    }
}

/// Finite discrete measure with precomputed cumulative weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<f64>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl DiscreteMeasure {
    /// Weights must be nonnegative and sum to 1 within `1e-12`.
    pub fn new(atoms: &[Vec<f64>], weights: Vec<f64>) -> Result<Self> {
        let dim = atoms.first().map(Vec::len).unwrap_or(0);
        if atoms.is_empty() || dim == 0 || atoms.iter().any(|a| a.len() != dim) {
            return Err(Error::arg("discrete measure needs atoms of one positive dimension"));
        }
        if weights.len() != atoms.len() {
            return Err(Error::arg(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::arg("discrete weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::arg(format!("discrete weights sum to {total}, not 1")));
        }
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(Self {
            dim,
            atoms: atoms.concat(),
            weights,
            cumulative,
        })
    }

    pub fn dirac(point: Vec<f64>) -> Self {
        Self::new(&[point], vec![1.0]).expect("single atom is valid")
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atom(&self, r: usize) -> &[f64] {
        &self.atoms[r * self.dim..(r + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Inverse-CDF draw of an atom index.
    fn sample_index(&self, stream: &mut Stream) -> usize {
        let total = *self.cumulative.last().expect("nonempty");
        let u = stream.random::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c <= u);
        // Skip trailing zero-weight atoms if rounding lands past the end.
        idx.min(self.len() - 1)
    }

    fn entropy(&self) -> f64 {
        -self
            .weights
            .iter()
            .filter(|&&w| w > 0.0)
            .map(|w| w * w.ln())
            .sum::<f64>()
    }
}

/// A node's private measure.
#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    Gaussian1d { mean: f64, std: f64 },
    Discrete(DiscreteMeasure),
}

impl Measure {
    pub fn gaussian(mean: f64, std: f64) -> Result<Self> {
        if !(std > 0.0 && std.is_finite() && mean.is_finite()) {
            return Err(Error::arg(format!("invalid gaussian(mean = {mean}, std = {std})")));
        }
        Ok(Measure::Gaussian1d { mean, std })
    }

    pub fn dim(&self) -> usize {
        match self {
            Measure::Gaussian1d { .. } => 1,
            Measure::Discrete(d) => d.dim(),
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            Measure::Gaussian1d { mean, std } if !(*std > 0.0) || !mean.is_finite() => Err(
                Error::arg(format!("malformed gaussian(mean = {mean}, std = {std})")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizationConfig {
    pub beta: f64,
    #[serde(default)]
    pub include_entropy_constant: bool,
}

impl RegularizationConfig {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::arg(format!("beta must be positive, got {beta}")));
        }
        Ok(Self {
            beta,
            include_entropy_constant: false,
        })
    }
}

/// Mini-batch estimate of the dual gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSample {
    pub mean_gradient: Vec<f64>,
    pub samples_used: usize,
}

/// Draws one point from `mu`.
pub fn sample_measure(mu: &Measure, stream: &mut Stream) -> Vec<f64> {
    match mu {
        Measure::Gaussian1d { mean, std } => {
            let z: f64 = stream.sample(StandardNormal);
            vec![mean + std * z]
        }
        Measure::Discrete(d) => d.atom(d.sample_index(stream)).to_vec(),
    }
}

/// Column of transport costs from every support point to `y`.
pub fn cost_column(grid: &SupportGrid, y: &[f64]) -> Vec<f64> {
    cost_column_with(grid, y, Cost::default())
}

pub fn cost_column_with(grid: &SupportGrid, y: &[f64], cost: Cost) -> Vec<f64> {
    grid.points().map(|z| cost.eval(z, y)).collect()
}

/// `max_l s_l` and `Σ_l exp(s_l − max)` for `s_l = (η_l − c_l)/β`.
fn shifted_exponent_sum(eta: &[f64], costs: &[f64], beta: f64, out: &mut [f64]) -> (f64, f64) {
    let mut max = f64::NEG_INFINITY;
    for ((o, e), c) in out.iter_mut().zip(eta).zip(costs) {
        *o = (e - c) / beta;
        max = max.max(*o);
    }
    let mut sum = 0.0;
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        sum += *o;
    }
    (max, sum)
}

/// `β log Σ_l exp((η_l − c_l)/β)`.
pub fn smoothed_max(eta: &[f64], costs: &[f64], beta: f64) -> f64 {
    let mut scratch = vec![0.0; eta.len()];
    let (max, sum) = shifted_exponent_sum(eta, costs, beta, &mut scratch);
    beta * (max + sum.ln())
}

/// Stabilised softmax of `(η − c)/β`.
pub fn softmax_primal(eta: &[f64], costs: &[f64], beta: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; eta.len()];
    softmax_into(eta, costs, beta, &mut out)?;
    Ok(out)
}

fn softmax_into(eta: &[f64], costs: &[f64], beta: f64, out: &mut [f64]) -> Result<()> {
    if !(beta > 0.0) {
        return Err(Error::arg(format!("beta must be positive, got {beta}")));
    }
    if eta.len() != costs.len() {
        return Err(Error::arg(format!(
            "potential has {} entries but cost column has {}",
            eta.len(),
            costs.len()
        )));
    }
    let (max, sum) = shifted_exponent_sum(eta, costs, beta, out);
    if !max.is_finite() || !(sum > 0.0) {
        return Err(Error::Numeric("softmax of non-finite scores".into()));
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
    Ok(())
}

fn check_shapes(mu: &Measure, grid: &SupportGrid, eta: &[f64]) -> Result<()> {
    mu.check()?;
    if mu.dim() != grid.dim() {
        return Err(Error::arg(format!(
            "measure lives in dimension {} but grid in {}",
            mu.dim(),
            grid.dim()
        )));
    }
    if eta.len() != grid.len() {
        return Err(Error::arg(format!(
            "potential has {} entries but grid has {} points",
            eta.len(),
            grid.len()
        )));
    }
    Ok(())
}

/// Average of `batch` softmax draws at `η`, with `y` sampled from `mu`.
pub fn stochastic_grad(
    mu: &Measure,
    grid: &SupportGrid,
    eta: &[f64],
    beta: f64,
    batch: usize,
    stream: &mut Stream,
) -> Result<GradientSample> {
    check_shapes(mu, grid, eta)?;
    if batch == 0 {
        return Err(Error::arg("batch size must be at least 1"));
    }
    let n = grid.len();
    let mut acc = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut costs = vec![0.0; n];
    for _ in 0..batch {
        let y = sample_measure(mu, stream);
        for (c, z) in costs.iter_mut().zip(grid.points()) {
            *c = Cost::default().eval(z, &y);
        }
        softmax_into(eta, &costs, beta, &mut p)?;
        for (a, v) in acc.iter_mut().zip(&p) {
            *a += v;
        }
    }
    let inv = 1.0 / batch as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    Ok(GradientSample {
        mean_gradient: acc,
        samples_used: batch,
    })
}

/// Closed-form dual value and gradient for a discrete measure.
pub fn exact_dual(
    mu: &Measure,
    grid: &SupportGrid,
    eta: &[f64],
    reg: RegularizationConfig,
) -> Result<(f64, Vec<f64>)> {
    let Measure::Discrete(d) = mu else {
        return Err(Error::arg("exact_dual needs a discrete measure"));
    };
    check_shapes(mu, grid, eta)?;
    let beta = reg.beta;
    let n = grid.len();
    let mut value = 0.0;
    let mut grad = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    for (r, &q) in d.weights().iter().enumerate() {
        if q == 0.0 {
            continue;
        }
        let costs = cost_column(grid, d.atom(r));
        let (max, sum) = shifted_exponent_sum(eta, &costs, beta, &mut scratch);
        value += q * beta * (max + sum.ln());
        for (g, s) in grad.iter_mut().zip(&scratch) {
            *g += q * s / sum;
        }
    }
    if reg.include_entropy_constant {
        value += beta * d.entropy();
    }
    Ok((value, grad))
}

/// Monte-Carlo estimate of the dual value from `samples` draws.
///
/// With `include_entropy_constant`, Gaussian measures add the analytic
/// differential entropy `β · ½ ln(2πeσ²)` and discrete measures add `β·H(q)`.
pub fn dual_value_mc(
    mu: &Measure,
    grid: &SupportGrid,
    eta: &[f64],
    reg: RegularizationConfig,
    samples: usize,
    stream: &mut Stream,
) -> Result<f64> {
    check_shapes(mu, grid, eta)?;
    if samples == 0 {
        return Err(Error::arg("evaluation needs at least one sample"));
    }
    let n = grid.len();
    let mut costs = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut total = 0.0;
    for _ in 0..samples {
        let y = sample_measure(mu, stream);
        for (c, z) in costs.iter_mut().zip(grid.points()) {
            *c = Cost::default().eval(z, &y);
        }
        let (max, sum) = shifted_exponent_sum(eta, &costs, reg.beta, &mut scratch);
        total += reg.beta * (max + sum.ln());
    }
    let mut value = total / samples as f64;
    if reg.include_entropy_constant {
        value += reg.beta
            * match mu {
                Measure::Gaussian1d { std, .. } => {
                    0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * std * std).ln()
                }
                Measure::Discrete(d) => d.entropy(),
            };
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{keyed, Domain};

    fn line(points: &[f64]) -> SupportGrid {
        SupportGrid::from_points(&points.iter().map(|&p| vec![p]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn cost_columns() {
        assert_eq!(cost_column(&line(&[0.0, 1.0]), &[0.0]), vec![0.0, 1.0]);
        assert_eq!(cost_column(&line(&[-1.0, 0.0, 1.0]), &[0.5]), vec![2.25, 0.25, 0.25]);
        let g = line(&[-1.0, 0.3, 2.0]);
        assert_eq!(cost_column(&g, &[0.3])[1], 0.0);
        let cubic = cost_column_with(&line(&[0.0, 2.0]), &[0.0], Cost { power: 3.0 });
        assert!((cubic[1] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax_primal(&[0.0, 0.0], &[0.0, 0.0], 1.0).unwrap(), vec![0.5, 0.5]);
        let p = softmax_primal(&[1.0, 0.0], &[0.0, 0.0], 1.0).unwrap();
        assert!((p[0] - 0.7310585786300049).abs() < 1e-12);
        assert!((p[1] - 0.2689414213699951).abs() < 1e-12);
        let p = softmax_primal(&[1.0, 0.0], &[0.0, 0.0], 1000.0).unwrap();
        assert!(p.iter().all(|v| (v - 0.5).abs() < 3e-4));
    }

    #[test]
    fn softmax_survives_extreme_potentials() {
        let p = softmax_primal(&[1e6, -1e6, 0.0], &[0.0, 100.0, 50.0], 1e-3).unwrap();
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
        assert!(softmax_primal(&[f64::NAN, 0.0], &[0.0, 0.0], 1.0).is_err());
        assert!(softmax_primal(&[0.0], &[0.0], 0.0).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(SupportGrid::from_points(&[vec![0.0], vec![0.0]]).is_err());
        assert!(SupportGrid::from_points(&[]).is_err());
        let g = SupportGrid::linspace(-5.0, 5.0, 100).unwrap();
        assert_eq!(g.len(), 100);
        assert_eq!(g.point(0), &[-5.0]);
        assert!((g.point(99)[0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn discrete_measure_validation() {
        assert!(DiscreteMeasure::new(&[vec![0.0], vec![1.0]], vec![0.5, 0.6]).is_err());
        assert!(DiscreteMeasure::new(&[vec![0.0], vec![1.0]], vec![1.5, -0.5]).is_err());
        assert!(DiscreteMeasure::new(&[vec![0.0]], vec![0.5, 0.5]).is_err());
        assert!(Measure::gaussian(0.0, 0.0).is_err());
    }

    #[test]
    fn dirac_samples_are_constant_and_grad_is_one_softmax() {
        let mu = Measure::Discrete(DiscreteMeasure::dirac(vec![0.25]));
        let grid = line(&[0.0, 0.5, 1.0]);
        let eta = [0.1, -0.2, 0.3];
        let mut s = keyed(1, Domain::Test, 0, 0);
        for _ in 0..10 {
            assert_eq!(sample_measure(&mu, &mut s), vec![0.25]);
        }
        let g = stochastic_grad(&mu, &grid, &eta, 0.5, 1, &mut s).unwrap();
        let direct = softmax_primal(&eta, &cost_column(&grid, &[0.25]), 0.5).unwrap();
        assert_eq!(g.mean_gradient, direct);
        assert_eq!(g.samples_used, 1);
    }

    #[test]
    fn stochastic_grad_is_replayable() {
        let mu = Measure::gaussian(0.3, 0.4).unwrap();
        let grid = SupportGrid::linspace(-1.0, 1.0, 7).unwrap();
        let eta = vec![0.0; 7];
        let a = stochastic_grad(&mu, &grid, &eta, 0.1, 16, &mut keyed(5, Domain::Test, 1, 2)).unwrap();
        let b = stochastic_grad(&mu, &grid, &eta, 0.1, 16, &mut keyed(5, Domain::Test, 1, 2)).unwrap();
        assert_eq!(a, b);
        assert!(stochastic_grad(&mu, &grid, &eta, 0.1, 0, &mut keyed(5, Domain::Test, 1, 2)).is_err());
    }

    #[test]
    fn exact_dual_single_atom() {
        let mu = Measure::Discrete(DiscreteMeasure::dirac(vec![0.0]));
        let grid = line(&[0.0]);
        let (v, g) = exact_dual(&mu, &grid, &[0.7], RegularizationConfig::new(0.3).unwrap()).unwrap();
        assert!((v - 0.7).abs() < 1e-15);
        assert_eq!(g, vec![1.0]);
        let gauss = Measure::gaussian(0.0, 1.0).unwrap();
        assert!(exact_dual(&gauss, &grid, &[0.0], RegularizationConfig::new(1.0).unwrap()).is_err());
    }

    #[test]
    fn dual_value_zero_potential_zero_cost() {
        let grid = line(&[0.0]);
        let reg = RegularizationConfig::new(0.2).unwrap();
        let mu = Measure::Discrete(DiscreteMeasure::dirac(vec![0.0]));
        let v = dual_value_mc(&mu, &grid, &[0.0], reg, 10, &mut keyed(0, Domain::Test, 0, 0)).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn entropy_constants() {
        let grid = line(&[0.0, 1.0]);
        let mut reg = RegularizationConfig::new(0.5).unwrap();
        let mu = Measure::Discrete(
            DiscreteMeasure::new(&[vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap(),
        );
        let (without, _) = exact_dual(&mu, &grid, &[0.0, 0.0], reg).unwrap();
        reg.include_entropy_constant = true;
        let (with, _) = exact_dual(&mu, &grid, &[0.0, 0.0], reg).unwrap();
        assert!((with - without - 0.5 * std::f64::consts::LN_2).abs() < 1e-14);

        let g = Measure::gaussian(0.0, 0.5).unwrap();
        let eta = [0.0, 0.0];
        let base = RegularizationConfig::new(0.5).unwrap();
        let a = dual_value_mc(&g, &grid, &eta, base, 50, &mut keyed(1, Domain::Test, 0, 0)).unwrap();
        let b = dual_value_mc(&g, &grid, &eta, reg, 50, &mut keyed(1, Domain::Test, 0, 0)).unwrap();
        let h = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * 0.25).ln();
        assert!((b - a - 0.5 * h).abs() < 1e-12);
    }
}
