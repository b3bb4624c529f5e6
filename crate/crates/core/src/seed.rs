//! Reproducible per-task random streams.
//!
//! A run seed is derived from a master seed and a list of integer tags by
//! repeated splitmix64 mixing. Each derived seed initializes its own
//! ChaCha8 generator, so tasks can run in any order or in parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `tags` into `master`, one tag at a time.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(master), |h, &t| splitmix64(h ^ splitmix64(t.wrapping_add(GOLDEN))))
}

pub fn rng_from(master: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tags))
}

/// Fixed tags naming what a stream is used for.
pub mod purpose {
    pub const DESIGN: u64 = 1;
    pub const SIMULATION: u64 = 2;
    pub const FIT: u64 = 3;
    pub const TEST_POINTS: u64 = 4;
    pub const REFERENCE: u64 = 5;
    pub const MONTE_CARLO: u64 = 6;
}
