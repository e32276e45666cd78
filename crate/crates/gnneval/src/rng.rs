//! Deterministic pseudo-random numbers.
//!
//! Everything random in this crate flows through [`Rng`], a SplitMix64
//! generator: the state is a 64-bit counter advanced by a fixed odd constant,
//! and each output is a bijective mix of the counter (Steele, Lea & Flood,
//! "Fast splittable pseudorandom number generators"). Identical seeds produce
//! identical streams on every platform, which is what the end-to-end
//! determinism guarantees of the pipeline rest on.
//!
//! Independent streams (one per meta-graph, per model seed, ...) are derived
//! with [`Rng::derive`], which mixes a stream tag into the base seed instead
//! of splitting the state, so stream `i` can be reconstructed without
//! generating streams `0..i`.

const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// Finalizer from SplitMix64; bijective on `u64`.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    counter: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { seed, counter: 0 }
    }

    /// Generator for an independent stream identified by `tag`.
    ///
    /// Streams with distinct tags are statistically independent of each other
    /// and of the parent; deriving is stateless with respect to how much of
    /// the parent stream has been consumed.
    pub fn derive(&self, tag: u64) -> Rng {
        Rng::new(mix(self.seed ^ tag.wrapping_mul(GAMMA).wrapping_add(1)))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix(self.seed.wrapping_add(self.counter.wrapping_mul(GAMMA)))
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal via Box–Muller (one value per pair of uniforms).
    pub fn normal(&mut self) -> f64 {
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64); // (0, 1]
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform integer in `[0, n)` by the multiply-high method. `n` must be
    /// nonzero; the modulo bias of n/2^64 is far below anything observable.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// In-place Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.index(i + 1);
            xs.swap(i, j);
        }
    }

    /// `k` distinct indices drawn uniformly from `[0, n)`, in sampled order.
    pub fn sample_distinct(&mut self, n: usize, k: usize) -> Vec<usize> {
        debug_assert!(k <= n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.index(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }

    /// Index drawn with probability proportional to `weights[i]`.
    pub fn weighted(&mut self, weights: &[f64]) -> usize {
        debug_assert!(!weights.is_empty() && weights.iter().all(|w| *w >= 0.0));
        let total: f64 = weights.iter().sum();
        debug_assert!(total > 0.0);
        let mut u = self.next_f64() * total;
        for (i, w) in weights.iter().enumerate() {
            u -= w;
            if u < 0.0 {
                return i;
            }
        }
        weights.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn derive_is_independent_of_consumption() {
        let mut a = Rng::new(7);
        let b = a.derive(3);
        for _ in 0..10 {
            a.next_u64();
        }
        let c = a.derive(3);
        assert_eq!(b.clone().next_u64(), c.clone().next_u64());
        // ... and distinct tags give distinct streams.
        assert_ne!(a.derive(1).next_u64(), a.derive(2).next_u64());
    }

    #[test]
    fn uniform_mean_and_range() {
        let mut rng = Rng::new(1);
        let mut sum = 0.0;
        for _ in 0..10_000 {
            let x = rng.next_f64();
            assert!((0.0..1.0).contains(&x));
            sum += x;
        }
        let mean = sum / 10_000.0;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn normal_moments() {
        let mut rng = Rng::new(2);
        let n = 20_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.03, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn index_is_in_range_and_covers() {
        let mut rng = Rng::new(3);
        let mut seen = [false; 7];
        for _ in 0..500 {
            seen[rng.index(7)] = true;
        }
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn sample_distinct_has_no_repeats() {
        let mut rng = Rng::new(4);
        for _ in 0..50 {
            let mut ids = rng.sample_distinct(20, 12);
            ids.sort_unstable();
            ids.dedup();
            assert_eq!(ids.len(), 12);
        }
    }

    #[test]
    fn weighted_respects_zero_weights() {
        let mut rng = Rng::new(5);
        for _ in 0..200 {
            let i = rng.weighted(&[0.0, 2.0, 0.0, 1.0]);
            assert!(i == 1 || i == 3);
        }
    }
}
