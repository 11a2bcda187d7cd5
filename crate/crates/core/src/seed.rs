//! Seed derivation.
//!
//! Every stochastic step (a trial, an episode, a generation) draws from its own
//! generator whose seed is derived from the run seed and a short tag path. This
//! keeps results independent of execution order and worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the crate.
pub type SearchRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a tag path.
pub fn derive(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t.wrapping_add(0x632B_E59B_D9B4_E019))))
}

pub fn rng(seed: u64) -> SearchRng {
    SearchRng::seed_from_u64(seed)
}

pub fn rng_for(seed: u64, tags: &[u64]) -> SearchRng {
    rng(derive(seed, tags))
}
