//! Step-size and mini-batch schedules.

use crate::error::{Error, Result};

/// Largest `γ` with `3Lγ + 12Lγ((τ² + τ)/m + 2τ)² ≤ 1`.
///
/// The staleness bound must not exceed the block count.
pub fn step_size(smoothness: f64, tau: usize, m: usize) -> Result<f64> {
    if !(smoothness > 0.0 && smoothness.is_finite()) {
        return Err(Error::arg(format!("smoothness must be positive, got {smoothness}")));
    }
    if m == 0 {
        return Err(Error::arg("need at least one block"));
    }
    if tau > m {
        return Err(Error::arg(format!(
            "staleness bound tau = {tau} exceeds the block count m = {m} (convergence requires tau <= m)"
        )));
    }
    let t = tau as f64;
    let stale = (t * t + t) / m as f64 + 2.0 * t;
    Ok(1.0 / (smoothness * (3.0 + 12.0 * stale * stale)))
}

/// `M_k = max(1, ⌈8σ²(k + 2m)/(mLε)⌉)`.
pub fn batch_size(k: usize, m: usize, sigma2: f64, epsilon: f64, smoothness: f64) -> Result<usize> {
    if !(epsilon > 0.0) || !(smoothness > 0.0) || !(sigma2 >= 0.0) || m == 0 {
        return Err(Error::arg(format!(
            "batch schedule needs eps > 0, L > 0, sigma2 >= 0, m >= 1 (got eps = {epsilon}, L = {smoothness}, sigma2 = {sigma2}, m = {m})"
        )));
    }
    let raw = 8.0 * sigma2 * (k + 2 * m) as f64 / (m as f64 * smoothness * epsilon);
    // Values within rounding of an integer are not bumped to the next one.
    let nearest = raw.round();
    let ceil = if (raw - nearest).abs() <= 1e-9 * raw.max(1.0) {
        nearest
    } else {
        raw.ceil()
    };
    Ok((ceil as usize).max(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_size_examples() {
        assert!((step_size(1.0, 0, 7).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((step_size(1.0, 1, 10).unwrap() - 1.0 / 61.08).abs() < 1e-12);
        assert!((step_size(2.0, 2, 4).unwrap() - 1.0 / 732.0).abs() < 1e-15);
    }

    #[test]
    fn step_size_meets_condition_with_equality() {
        for (l, tau, m) in [(0.5, 3, 8), (4.0, 1, 1), (10.0, 20, 20)] {
            let g = step_size(l, tau, m).unwrap();
            let t = tau as f64;
            let s = (t * t + t) / m as f64 + 2.0 * t;
            let lhs = 3.0 * l * g + 12.0 * l * g * s * s;
            assert!((lhs - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn step_size_rejects_tau_above_m() {
        assert!(step_size(1.0, 5, 4).is_err());
        assert!(step_size(0.0, 0, 4).is_err());
    }

    #[test]
    fn batch_examples() {
        for k in [0, 10, 1000] {
            assert_eq!(batch_size(k, 10, 0.0, 0.1, 1.0).unwrap(), 1);
        }
        assert_eq!(batch_size(0, 10, 1.0, 0.1, 1.0).unwrap(), 160);
        let mut prev = 0;
        for k in 0..500 {
            let b = batch_size(k, 7, 0.3, 0.05, 2.0).unwrap();
            assert!(b >= prev);
            prev = b;
        }
        assert!(batch_size(0, 10, 1.0, 0.0, 1.0).is_err());
    }
}
