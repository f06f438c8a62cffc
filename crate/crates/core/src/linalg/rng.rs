//! Deterministic random numbers.
//!
//! The generator is ChaCha8 seeded from a 64-bit seed. Children produced by
//! [`Rng::split`] are seeded from the parent's output stream, so a tree of
//! generators is fully determined by the root seed. A single `Rng` must not be
//! shared across threads; split it instead.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Matrix;

#[derive(Clone, Debug)]
pub struct Rng {
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent child generator; advances `self`.
    pub fn split(&mut self) -> Rng {
        Rng::new(self.inner.next_u64())
    }

    /// `count` children, in order.
    pub fn split_n(&mut self, count: usize) -> Vec<Rng> {
        (0..count).map(|_| self.split()).collect()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn normal_vec(&mut self, len: usize) -> Vec<f64> {
        (0..len).map(|_| self.normal()).collect()
    }

    /// Matrix with i.i.d. `N(0, std²)` entries.
    pub fn normal_matrix(&mut self, rows: usize, cols: usize, std: f64) -> Matrix {
        let data = (0..rows * cols).map(|_| std * self.normal()).collect();
        Matrix::from_raw(rows, cols, data)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
