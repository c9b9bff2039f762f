//! Seeded random stream shared by every stochastic step of the pipeline.
//!
//! Backed by ChaCha8 (counter-based, output is stable across platforms and
//! across `rand_chacha` releases). A generator is addressed by a 64-bit seed
//! plus a 64-bit stream id, so independent sub-streams such as "trial 17 of
//! the generator" or "epoch 3 shuffle" can be derived without consuming the
//! parent stream.

use rand::{seq::SliceRandom, Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bumped whenever the mapping from seed to stream changes.
pub const RNG_ALGORITHM: &str = "chacha8-v1";

#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, inner }
    }

    /// Independent generator for a named sub-task, keyed on `(seed, a, b)`.
    pub fn derive(seed: u64, a: u64, b: u64) -> Self {
        // splitmix-style mixing keeps nearby (a, b) pairs far apart
        let mut z = a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.rotate_left(29);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        Self::with_stream(seed, z)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform sample in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.inner.random::<f64>()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
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
