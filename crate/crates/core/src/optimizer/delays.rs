//! Read-index schedules for stale block reads.
//!
//! `read_index(p, k)` is `j_p(k+1)`: the iteration whose snapshot of block `p`
//! is visible when iterate `k + 1` is formed. `j_p(k+1) = k` is a fresh read.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{self, Domain};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelaySchedule {
    tau: usize,
    m: usize,
    // assignment[k][p] = j_p(k+1)
    assignment: Vec<Vec<usize>>,
}

impl DelaySchedule {
    /// No staleness: every read is fresh.
    pub fn fresh(m: usize, iterations: usize) -> Self {
        Self {
            tau: 0,
            m,
            assignment: (0..iterations).map(|k| vec![k; m]).collect(),
        }
    }

    /// Per-block staleness drawn uniformly from `0..=tau`, repaired so each
    /// block's read index never moves backwards.
    pub fn uniform(m: usize, tau: usize, iterations: usize, seed: u64) -> Self {
        let mut last = vec![0usize; m];
        let assignment = (0..iterations)
            .map(|k| {
                let mut stream = rng::keyed(seed, Domain::DelaySchedule, k as u64, 0);
                (0..m)
                    .map(|p| {
                        let lag = stream.random_range(0..=tau);
                        let j = k.saturating_sub(lag).max(last[p]);
                        last[p] = j;
                        j
                    })
                    .collect()
            })
            .collect();
        Self { tau, m, assignment }
    }

    /// Validates an explicit assignment against the window
    /// `max(0, k − τ) ≤ j_p(k+1) ≤ k` and per-block monotonicity.
    pub fn from_assignment(tau: usize, assignment: Vec<Vec<usize>>) -> Result<Self> {
        let m = assignment.first().map_or(0, Vec::len);
        for (k, row) in assignment.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Schedule(format!("row {k} has {} blocks, expected {m}", row.len())));
            }
            for (p, &j) in row.iter().enumerate() {
                check_window(tau, p, k, j)?;
                if k > 0 && j < assignment[k - 1][p] {
                    return Err(Error::Schedule(format!(
                        "read index of block {p} decreases at iteration {k}"
                    )));
                }
            }
        }
        Ok(Self { tau, m, assignment })
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn num_blocks(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// `j_p(k+1)`.
    pub fn read_index(&self, p: usize, k: usize) -> Result<usize> {
        let j = *self
            .assignment
            .get(k)
            .and_then(|row| row.get(p))
            .ok_or_else(|| Error::Schedule(format!("no read index for block {p} at iteration {k}")))?;
        check_window(self.tau, p, k, j)?;
        Ok(j)
    }
}

fn check_window(tau: usize, p: usize, k: usize, j: usize) -> Result<()> {
    let lo = k.saturating_sub(tau);
    if j < lo || j > k {
        return Err(Error::Schedule(format!(
            "j_{p}({}) = {j} outside [{lo}, {k}]",
            k + 1
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_respects_window_and_monotonicity() {
        let s = DelaySchedule::uniform(6, 3, 300, 42);
        let mut prev = vec![0; 6];
        for k in 0..300 {
            for (p, last) in prev.iter_mut().enumerate() {
                let j = s.read_index(p, k).unwrap();
                assert!(j <= k && k - j <= 3);
                assert!(j >= *last);
                *last = j;
            }
        }
        assert_eq!(s, DelaySchedule::uniform(6, 3, 300, 42));
    }

    #[test]
    fn fresh_reads_current_iterate() {
        let s = DelaySchedule::fresh(3, 5);
        assert_eq!(s.read_index(2, 4).unwrap(), 4);
        assert!(s.read_index(0, 5).is_err());
    }

    #[test]
    fn explicit_assignment_is_checked() {
        assert!(DelaySchedule::from_assignment(1, vec![vec![0], vec![0], vec![1]]).is_ok());
        // j_0(3) = 0 is older than τ = 1 allows.
        assert!(DelaySchedule::from_assignment(1, vec![vec![0], vec![0], vec![0]]).is_err());
        // Future read.
        assert!(DelaySchedule::from_assignment(2, vec![vec![1]]).is_err());
        // Moves backwards.
        assert!(DelaySchedule::from_assignment(3, vec![vec![0], vec![1], vec![0]]).is_err());
    }
}
