//! The acceleration sequence `θ_k`.
//!
//! `θ_1 = 1/m` and `θ_{k+1} = (√(θ_k⁴ + 4θ_k²) − θ_k²)/2`, the positive root
//! of `(1 − θ')/θ'² = 1/θ_k²`. The iterates satisfy
//! `1/(k − 1 + 2m) ≤ θ_k ≤ 2/(k − 1 + 2m)`.

use crate::error::{Error, Result};

/// One step of the θ recursion.
pub fn theta_next(theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::arg(format!("theta must lie in (0, 1], got {theta}")));
    }
    Ok(theta_step(theta))
}

// (√(θ⁴+4θ²) − θ²)/2 rewritten as 2θ²/(θ² + √(θ⁴+4θ²)); same value, no
// cancellation once θ is small.
fn theta_step(theta: f64) -> f64 {
    let t2 = theta * theta;
    2.0 * t2 / (t2 + theta * (t2 + 4.0).sqrt())
}

/// Growable cache of `θ_1, θ_2, …` for `m` blocks.
#[derive(Clone)]
pub struct ThetaSchedule {
    m: usize,
    cache: Vec<f64>,
    step: fn(f64) -> f64,
}

impl std::fmt::Debug for ThetaSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ThetaSchedule")
            .field("m", &self.m)
            .field("cached", &self.cache.len())
            .finish()
    }
}

impl ThetaSchedule {
    pub fn new(m: usize) -> Self {
        Self::with_recursion(m, theta_step)
    }

    /// Schedule driven by an arbitrary recursion. Exists so diagnostics can
    /// prove they notice a wrong recursion.
    pub fn with_recursion(m: usize, step: fn(f64) -> f64) -> Self {
        assert!(m >= 1, "theta schedule needs at least one block");
        Self {
            m,
            cache: vec![1.0 / m as f64],
            step,
        }
    }

    pub fn num_blocks(&self) -> usize {
        self.m
    }

    /// Makes `θ_1 ..= θ_k` available.
    pub fn ensure(&mut self, k: usize) {
        while self.cache.len() < k {
            let last = *self.cache.last().expect("nonempty");
            self.cache.push((self.step)(last));
        }
    }

    /// `θ_k` for `k ≥ 1`, extending the cache as needed.
    pub fn theta(&mut self, k: usize) -> f64 {
        assert!(k >= 1, "theta is indexed from 1");
        self.ensure(k);
        self.cache[k - 1]
    }

    /// `θ_k` from the cache only.
    pub fn cached(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.cache.get(i).copied())
    }

    /// `d_l = θ_{l+1}(1 − θ_l)/θ_l`, the per-step momentum ratio used by the
    /// stale-iterate compensation.
    pub fn momentum_ratio(&mut self, l: usize) -> f64 {
        let t = self.theta(l);
        self.theta(l + 1) * (1.0 - t) / t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert!((theta_next(0.5).unwrap() - 0.390_388_203_202_208_4).abs() < 1e-12);
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        assert!((theta_next(1.0).unwrap() - golden).abs() < 1e-15);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(theta_next(0.0).is_err());
        assert!(theta_next(1.5).is_err());
        assert!(theta_next(f64::NAN).is_err());
    }

    #[test]
    fn recursion_identity() {
        for theta in [1.0, 0.5, 0.1, 1e-3, 1e-6] {
            let next = theta_next(theta).unwrap();
            let lhs = (1.0 - next) / (next * next) * theta * theta;
            assert!((lhs - 1.0).abs() < 1e-12, "theta {theta}: {lhs}");
        }
    }

    #[test]
    fn momentum_ratio_for_two_blocks() {
        let mut s = ThetaSchedule::new(2);
        assert_eq!(s.theta(1), 0.5);
        assert!((s.momentum_ratio(1) - 0.390_388_203_202_208_4).abs() < 1e-12);
    }

    #[test]
    fn single_block_starts_at_one() {
        let mut s = ThetaSchedule::new(1);
        assert_eq!(s.theta(1), 1.0);
        assert_eq!(s.momentum_ratio(1), 0.0);
    }
}
