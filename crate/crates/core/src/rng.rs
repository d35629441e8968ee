//! Seeded random number generation.
//!
//! Every stochastic component takes a `u64` seed and draws from a
//! [`SimRng`], so identical seeds give identical results on every platform.

use rand::SeedableRng;

pub type SimRng = rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
