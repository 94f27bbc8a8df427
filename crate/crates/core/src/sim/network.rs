use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SimTime;
use crate::error::{Error, Result};
use crate::rng::{self, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationMode {
    /// Every sweep of `m` ticks activates each node once, in a fresh order.
    Permutation,
    /// Each tick activates a uniformly drawn node.
    Random,
}

/// Seeded stream of `(t_k, i_k)` with `t_k = (k+1) · interval`.
#[derive(Debug, Clone)]
pub struct ActivationSchedule {
    mode: ActivationMode,
    m: usize,
    interval: SimTime,
    seed: u64,
    sweep: Option<(u64, Vec<usize>)>,
}

impl ActivationSchedule {
    pub fn new(mode: ActivationMode, m: usize, interval_s: f64, seed: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::arg("activation schedule needs at least one node"));
        }
        let interval = SimTime::from_secs(interval_s)?;
        if interval == SimTime::ZERO {
            return Err(Error::arg(format!("activation interval must be positive, got {interval_s}")));
        }
        Ok(Self {
            mode,
            m,
            interval,
            seed,
            sweep: None,
        })
    }

    pub fn mode(&self) -> ActivationMode {
        self.mode
    }

    pub fn interval(&self) -> SimTime {
        self.interval
    }

    pub fn time(&self, k: u64) -> SimTime {
        SimTime((k + 1) * self.interval.0)
    }

    /// Node activated at tick `k`.
    pub fn node(&mut self, k: u64) -> usize {
        match self.mode {
            ActivationMode::Random => {
                rng::keyed(self.seed, Domain::Activation, k, 1).random_range(0..self.m)
            }
            ActivationMode::Permutation => {
                let sweep = k / self.m as u64;
                if self.sweep.as_ref().map(|(s, _)| *s) != Some(sweep) {
                    let mut perm: Vec<usize> = (0..self.m).collect();
                    perm.shuffle(&mut rng::keyed(self.seed, Domain::Activation, sweep, 0));
                    self.sweep = Some((sweep, perm));
                }
                let (_, perm) = self.sweep.as_ref().expect("filled above");
                perm[(k % self.m as u64) as usize]
            }
        }
    }

    /// Every activation with `t_k ≤ horizon`.
    pub fn until(&mut self, horizon: SimTime) -> Vec<(SimTime, usize)> {
        let count = horizon.0 / self.interval.0;
        (0..count).map(|k| (self.time(k), self.node(k))).collect()
    }
}

/// `build_schedule` as a free function over seconds.
pub fn build_schedule(
    mode: ActivationMode,
    m: usize,
    interval_s: f64,
    horizon_s: f64,
    seed: u64,
) -> Result<Vec<(SimTime, usize)>> {
    let horizon = SimTime::from_secs(horizon_s)?;
    Ok(ActivationSchedule::new(mode, m, interval_s, seed)?.until(horizon))
}

/// Categorical per-message delay law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommModel {
    pub support: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Default for CommModel {
    fn default() -> Self {
        Self {
            support: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            probs: vec![0.2; 5],
        }
    }
}

impl CommModel {
    pub fn new(support: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        let model = Self { support, probs };
        model.validate()?;
        Ok(model)
    }

    /// Single-atom law.
    pub fn constant(delay_s: f64) -> Result<Self> {
        Self::new(vec![delay_s], vec![1.0])
    }

    pub fn validate(&self) -> Result<()> {
        if self.support.is_empty() || self.support.len() != self.probs.len() {
            return Err(Error::arg(format!(
                "delay support has {} entries and probabilities {}",
                self.support.len(),
                self.probs.len()
            )));
        }
        if let Some(d) = self.support.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return Err(Error::arg(format!("delays must be positive, got {d}")));
        }
        if self.probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::arg("delay probabilities must be non-negative"));
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::arg(format!("delay probabilities sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn max_delay(&self) -> f64 {
        self.support
            .iter()
            .zip(&self.probs)
            .filter(|(_, p)| **p > 0.0)
            .map(|(d, _)| *d)
            .fold(0.0, f64::max)
    }

    pub fn mean_delay(&self) -> f64 {
        self.support.iter().zip(&self.probs).map(|(d, p)| d * p).sum()
    }

    /// Delay of the message identified by `(a, b)`; replay is exact.
    pub fn sample_delay(&self, seed: u64, a: u64, b: u64) -> f64 {
        let mut stream = rng::keyed(seed, Domain::Delay, a, b);
        if self.support.len() == 1 {
            return self.support[0];
        }
        let law = WeightedIndex::new(&self.probs).expect("validated probabilities");
        self.support[law.sample(&mut stream)]
    }

    pub fn sample_delay_time(&self, seed: u64, a: u64, b: u64) -> Result<SimTime> {
        SimTime::from_secs(self.sample_delay(seed, a, b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_horizon() {
        assert!(build_schedule(ActivationMode::Permutation, 3, 0.2, 0.0, 1).unwrap().is_empty());
    }

    #[test]
    fn permutation_sweeps() {
        let s = build_schedule(ActivationMode::Permutation, 3, 0.2, 1.2, 7).unwrap();
        assert_eq!(s.len(), 6);
        let times: Vec<f64> = s.iter().map(|(t, _)| t.as_secs()).collect();
        assert_eq!(times, vec![0.2, 0.4, 0.6, 0.8, 1.0, 1.2]);
        for sweep in s.chunks(3) {
            let mut nodes: Vec<usize> = sweep.iter().map(|(_, i)| *i).collect();
            nodes.sort_unstable();
            assert_eq!(nodes, vec![0, 1, 2]);
        }
    }

    #[test]
    fn schedules_replay() {
        for mode in [ActivationMode::Permutation, ActivationMode::Random] {
            let a = build_schedule(mode, 7, 0.2, 50.0, 3).unwrap();
            let b = build_schedule(mode, 7, 0.2, 50.0, 3).unwrap();
            assert_eq!(a, b);
            let c = build_schedule(mode, 7, 0.2, 50.0, 4).unwrap();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn random_mode_covers_nodes() {
        let s = build_schedule(ActivationMode::Random, 4, 0.1, 100.0, 2).unwrap();
        let mut counts = [0usize; 4];
        for (_, i) in &s {
            counts[*i] += 1;
        }
        assert!(counts.iter().all(|&c| c > 150), "{counts:?}");
    }

    #[test]
    fn delays_in_support() {
        let c = CommModel::default();
        for k in 0..1000 {
            let d = c.sample_delay(1, k, 0);
            assert!(c.support.contains(&d));
        }
    }

    #[test]
    fn delay_mean_matches_uniform_categorical() {
        let c = CommModel::default();
        let n = 100_000;
        let mean = (0..n).map(|k| c.sample_delay(5, k, 3)).sum::<f64>() / n as f64;
        assert!((mean - 0.6).abs() < 0.01, "{mean}");
    }

    #[test]
    fn degenerate_support() {
        let c = CommModel::constant(0.2).unwrap();
        assert!((0..50).all(|k| c.sample_delay(9, k, k) == 0.2));
    }

    #[test]
    fn rejects_bad_models() {
        assert!(CommModel::new(vec![0.2, 0.4], vec![0.5]).is_err());
        assert!(CommModel::new(vec![0.0], vec![1.0]).is_err());
        assert!(CommModel::new(vec![0.2, 0.4], vec![0.7, 0.7]).is_err());
        assert!(CommModel::new(vec![], vec![]).is_err());
    }
}
