//! Seeded random stream.
//!
//! The generator is ChaCha8 (`rand_chacha`), seeded from a single `u64`
//! through `SeedableRng::seed_from_u64`. Uniform reals take the top 53 bits
//! of a `u64` draw. Normal deviates use the Box-Muller transform: each pair
//! of uniforms yields two deviates, the second is held and returned by the
//! next call.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::Matrix;
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    /// An independent stream of the same seed, e.g. one per query. Streams
    /// with different ids never overlap.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            inner,
            spare_normal: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Splits off a child generator seeded from this stream.
    pub fn fork(&mut self) -> Self {
        Self::new(self.next_u64())
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)` by rejection (unbiased). `n` must be > 0.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "Rng::below called with n = 0");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // 1 - u lies in (0, 1], keeping the log finite
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn shuffle<X>(&mut self, items: &mut [X]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// `k` distinct indices from `0..n`, in draw order.
    pub fn choose_distinct(&mut self, n: usize, k: usize) -> Vec<usize> {
        let mut pool: Vec<usize> = (0..n).collect();
        let k = k.min(n);
        for i in 0..k {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}

/// `n × d` matrix of i.i.d. standard normal draws, filled row by row.
pub fn gaussian_sample<T: Real>(rng: &mut Rng, n: usize, d: usize) -> Matrix<T> {
    Matrix::from_fn(n, d, |_, _| T::lit(rng.normal()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_matrix() {
        let a: Matrix<f64> = gaussian_sample(&mut Rng::new(7), 10, 3);
        let b: Matrix<f64> = gaussian_sample(&mut Rng::new(7), 10, 3);
        assert_eq!(a, b);
    }

    #[test]
    fn different_seed_differs() {
        let a: Matrix<f64> = gaussian_sample(&mut Rng::new(7), 10, 3);
        let b: Matrix<f64> = gaussian_sample(&mut Rng::new(8), 10, 3);
        assert_ne!(a, b);
    }

    #[test]
    fn moments_of_large_sample() {
        let n = 100_000;
        let m: Matrix<f64> = gaussian_sample(&mut Rng::new(2024), n, 1);
        let mean = m.as_slice().iter().sum::<f64>() / n as f64;
        let var = m.as_slice().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn streams_are_independent_of_each_other() {
        let mut a = Rng::with_stream(3, 0);
        let mut b = Rng::with_stream(3, 1);
        assert_ne!(a.next_u64(), b.next_u64());
        let mut a2 = Rng::with_stream(3, 0);
        let mut a3 = Rng::with_stream(3, 0);
        assert_eq!(a2.next_u64(), a3.next_u64());
    }

    #[test]
    fn below_stays_in_range_and_covers() {
        let mut rng = Rng::new(1);
        let mut seen = [false; 7];
        for _ in 0..1000 {
            let v = rng.below(7);
            seen[v] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn choose_distinct_has_no_repeats() {
        let mut rng = Rng::new(5);
        let mut idx = rng.choose_distinct(20, 20);
        idx.sort_unstable();
        assert_eq!(idx, (0..20).collect::<Vec<_>>());
    }
}
