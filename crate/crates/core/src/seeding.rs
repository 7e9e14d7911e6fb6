//! Deterministic seed derivation.
//!
//! Every randomized operation in the crate owns a [`ChaCha8Rng`] seeded from
//! a `u64`. Sub-seeds are derived with splitmix64 steps so that independent
//! pieces of work (per goal, per run, per event) get decorrelated streams
//! without sharing mutable RNG state. Derivation is pure: the same
//! `(seed, salts...)` always yields the same stream, which is what makes
//! scenario outputs reproducible and prefix-stable.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One splitmix64 round over `seed ^ salt`.
pub fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Fold a list of salts into a seed, one mix round per salt.
pub fn mix_all(seed: u64, salts: &[u64]) -> u64 {
    salts.iter().fold(seed, |acc, &s| mix(acc, s))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
