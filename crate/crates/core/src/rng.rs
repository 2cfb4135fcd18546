//! Seed derivation shared by every stochastic path.
//!
//! Independent work items (shots, trajectories, generated images) never share
//! a generator. Item `k` of a run seeded with `base` draws from its own
//! ChaCha stream seeded with the `k`-th output of a SplitMix64 sequence
//! started at `base`, so results do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output mixing function.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The `k`-th output of a SplitMix64 generator seeded with `base`.
pub fn derive_seed(base: u64, k: u64) -> u64 {
    mix64(base.wrapping_add(k.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn rng_for(base: u64, k: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, k))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
