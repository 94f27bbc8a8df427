//! Smoothed semi-discrete dual of one node: closed form against Monte Carlo.

use async_barycenter::rng::{keyed, Domain};
use async_barycenter::transport::{
    dual_value_mc, exact_dual, stochastic_grad, DiscreteMeasure, Measure, RegularizationConfig, SupportGrid,
};

fn main() -> async_barycenter::Result<()> {
    let grid = SupportGrid::linspace(0.0, 1.0, 6)?;
    let mu = Measure::Discrete(DiscreteMeasure::new(&[vec![0.1], vec![0.45], vec![0.9]], vec![0.5, 0.3, 0.2])?);
    let reg = RegularizationConfig::new(0.05)?;
    let eta = [0.02, -0.01, 0.0, 0.03, -0.02, 0.01];

    let (value, grad) = exact_dual(&mu, &grid, &eta, reg)?;
    let mut stream = keyed(1, Domain::Gradient, 0, 0);
    let mc = dual_value_mc(&mu, &grid, &eta, reg, 20_000, &mut stream)?;
    println!("dual value  exact {value:.6}  monte-carlo {mc:.6}");

    // The gradient is a probability vector on the grid: the entropic
    // transport plan's second marginal.
    for batch in [1, 10, 1000] {
        let g = stochastic_grad(&mu, &grid, &eta, reg.beta, batch, &mut stream)?;
        let err: f64 = g.mean_gradient.iter().zip(&grad).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        println!("batch {batch:>5}: |g - grad| = {err:.4}, mass = {:.12}", g.mean_gradient.iter().sum::<f64>());
    }
    println!("exact gradient {:?}", grad.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>());
    Ok(())
}
