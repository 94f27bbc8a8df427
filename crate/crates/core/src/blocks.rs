//! Stacked per-node vectors.

use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;

/// `m` blocks of dimension `n`, stored row-major. Block `i` is node `i`'s
/// variable; network-level matrices act on it as `A ⊗ I_n` without ever
/// forming the Kronecker product.
#[derive(Debug, Clone, PartialEq)]
pub struct Blocks {
    m: usize,
    n: usize,
    data: Vec<f64>,
}

impl Blocks {
    pub fn zeros(m: usize, n: usize) -> Self {
        Self {
            m,
            n,
            data: vec![0.0; m * n],
        }
    }

    /// Builds from per-block rows. All rows must share one length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Option<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return None;
        }
        Some(Self {
            m,
            n,
            data: rows.concat(),
        })
    }

    pub fn num_blocks(&self) -> usize {
        self.m
    }

    pub fn block_dim(&self) -> usize {
        self.n
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n.max(1)).take(self.m)
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn dot(&self, other: &Blocks) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// `self + scale * other`.
    pub fn axpy(&self, scale: f64, other: &Blocks) -> Blocks {
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + scale * b)
            .collect();
        Blocks { data, ..*self }
    }

    pub fn scaled(&self, scale: f64) -> Blocks {
        Blocks {
            data: self.data.iter().map(|a| a * scale).collect(),
            ..*self
        }
    }

    /// `(A ⊗ I_n) self` for a dense `m × m` matrix `A`.
    pub fn kron_apply(&self, a: &DMatrix<f64>) -> Blocks {
        let mut out = Blocks::zeros(self.m, self.n);
        for i in 0..self.m {
            let dst = out.block_mut(i);
            for j in 0..self.m {
                let w = a[(i, j)];
                if w != 0.0 {
                    for (d, s) in dst.iter_mut().zip(self.block(j)) {
                        *d += w * s;
                    }
                }
            }
        }
        out
    }

    /// Largest relative deviation `max |a-b| / max(|a|, |b|, floor)`.
    pub fn max_rel_diff(&self, other: &Blocks, floor: f64) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(floor))
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for Blocks {
    type Output = f64;

    fn index(&self, (i, l): (usize, usize)) -> &f64 {
        &self.data[i * self.n + l]
    }
}

impl IndexMut<(usize, usize)> for Blocks {
    fn index_mut(&mut self, (i, l): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + l]
    }
}
