use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Real;

/// Caller-owned, splittable pseudo-random stream.
///
/// Built on a counter-based ChaCha core: a child stream is a pure function of
/// the parent seed, the parent stream id and the child index, so per-sample
/// streams do not depend on how work is scheduled.
#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

fn mix(mut x: u64) -> u64 {
    // splitmix64 finalizer
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        SeededRng {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream `index`. Does not advance `self`.
    pub fn split(&self, index: u64) -> Self {
        Self::with_stream(self.seed, mix(self.stream ^ mix(index.wrapping_add(1))))
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> Real {
        self.inner.random::<f64>() as Real
    }

    pub fn normal(&mut self) -> Real {
        let z: f64 = self.inner.sample(StandardNormal);
        z as Real
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
}
