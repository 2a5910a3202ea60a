//! Seeded random streams.
//!
//! Every stochastic component takes an explicit `ChaCha8Rng`; independent
//! sub-streams are split off by drawing a fresh seed from the parent, so a
//! (config, seed) pair fully determines a run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type LabRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> LabRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent child stream.
pub fn split(parent: &mut LabRng) -> LabRng {
    ChaCha8Rng::seed_from_u64(parent.random())
}

/// Deterministic stream keyed by a base seed and a purpose tag.
pub fn keyed(seed: u64, tag: u64) -> LabRng {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}
