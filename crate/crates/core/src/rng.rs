//! Seeded random source that counts its draws.

use rand::{Error, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every stochastic decision in an environment goes through one of these.
/// The draw count is recorded in traces and compared on replay.
#[derive(Debug, Clone)]
pub struct CountingRng {
    inner: ChaCha8Rng,
    draws: u64,
}

impl CountingRng {
    pub fn seed_from(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
            draws: 0,
        }
    }

    /// Number of primitive draws (`next_u32`, `next_u64`, `fill_bytes`) so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }
}

impl RngCore for CountingRng {
    fn next_u32(&mut self) -> u32 {
        self.draws += 1;
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.draws += 1;
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.draws += 1;
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), Error> {
        self.draws += 1;
        self.inner.try_fill_bytes(dest)
    }
}
