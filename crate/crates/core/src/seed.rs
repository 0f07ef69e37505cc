//! Seed derivation. Every stochastic component draws from a ChaCha stream
//! keyed by a seed derived from a parent seed and an index, so results never
//! depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for `(stream, index)` under `parent`.
pub fn derive(parent: u64, stream: u64, index: u64) -> u64 {
    mix64(mix64(parent ^ mix64(stream)).wrapping_add(index))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Named streams, kept distinct so unrelated consumers never share draws.
pub mod stream {
    pub const EPISODE: u64 = 1;
    pub const ITERATION: u64 = 2;
    pub const EVAL: u64 = 3;
    pub const TRIAL: u64 = 4;
    pub const INIT: u64 = 5;
    pub const VALUE_FIT: u64 = 6;
    pub const SWEEP: u64 = 7;
}
