use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded random stream. Thin wrapper over ChaCha8, which is counter-based
/// and produces identical sequences for identical seeds on every platform.
///
/// `fork(index)` derives an independent child stream from the *base* seed and
/// the index alone, never from the parent's position. That gives two
/// properties the estimators rely on: sample `i` is the same no matter how
/// many samples run or on which thread, and growing the sample count extends
/// the stream instead of reshuffling it.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

pub const RNG_ALGORITHM: &str = "chacha8";

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Child stream determined by `(base seed, index)` only.
    pub fn fork(&self, index: u64) -> RngStream {
        let mixed = splitmix64(self.seed ^ index.wrapping_add(1).wrapping_mul(0x9E3779B97F4A7C15));
        RngStream::new(mixed)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn algorithm(&self) -> &'static str {
        RNG_ALGORITHM
    }

    /// Uniform draw from the half-open interval `[lo, hi)`. A degenerate
    /// interval (`lo == hi`) yields `lo` without consuming stream state.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if lo == hi {
            return lo;
        }
        self.rng.gen_range(lo..hi)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(rand_distr::StandardNormal)
    }

    pub fn gen_index(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        xs.shuffle(&mut self.rng);
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}
