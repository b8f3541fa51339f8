//! Seeded RNG streams.
//!
//! Every randomized operation in the crate derives its generator from a
//! `(seed, stream)` pair, with an optional substream index for per-tree or
//! per-fold work. Distinct streams give independent generators from one
//! user-facing seed, so concurrent or reordered work stays reproducible.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids for the fixed consumers of a run seed.
pub mod stream {
    pub const SYNTH: u64 = 1;
    pub const KFOLD: u64 = 2;
    pub const SMOTE: u64 = 3;
    pub const FOREST: u64 = 4;
    pub const LSTM: u64 = 5;
    pub const META: u64 = 6;
    pub const STREAM_FIXTURE: u64 = 7;
}

pub fn for_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    for_substream(seed, stream, 0)
}

/// Stream occupies the high 32 bits, index the low 32, so `(stream, index)`
/// pairs never collide.
pub fn for_substream(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    debug_assert!(stream < (1 << 32) && index < (1 << 32));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stream << 32) | index).into());
    rng
}

/// Derive a child seed (SplitMix64 finalizer over seed ⊕ salted counter).
pub fn derive(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ (salt.wrapping_add(1)).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
