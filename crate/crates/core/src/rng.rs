//! Reproducible random streams.
//!
//! Every draw in the crate comes from a ChaCha8 generator whose key is
//! derived from a 64-bit seed, whose 64-bit stream selects the purpose
//! (data generation, first-sample multipliers, ...) and whose block counter is
//! positioned by a replicate index. Replicate `b` of stream `s` therefore
//! depends only on `(seed, s, b)`, never on how many replicates were drawn
//! before it or on which thread drew them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Words reserved per replicate index (2^36 words, far more than any
/// replicate consumes). Indices stay below 2^32.
const WORDS_PER_INDEX_SHIFT: u32 = 36;

/// Multiplier stream for the first (or only) sample.
pub const STREAM_SAMPLE1: u64 = 1;
/// Multiplier stream for the second sample.
pub const STREAM_SAMPLE2: u64 = 2;
/// Data generation.
pub const STREAM_DATA: u64 = 16;
/// Model-level parameters (covariance draws, Stiefel frames, shifts).
pub const STREAM_MODEL: u64 = 17;

/// SplitMix64 finaliser.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replication `r` of a study seeded with `seed` (`seed ⊕ r`, mixed).
pub fn replicate_seed(seed: u64, r: u64) -> u64 {
    splitmix64(seed ^ r)
}

/// Stream for the inner loop attached to outer replicate `b` of `base`.
pub fn inner_stream(base: u64, b: usize) -> u64 {
    debug_assert!(base < 1 << 8);
    base | ((b as u64 + 1) << 8)
}

fn key_from_seed(seed: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    let mut state = seed;
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    key
}

/// Generator for `(seed, stream, index)`.
pub fn stream_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    assert!(index < 1 << 32, "replicate index {index} out of range");
    let mut rng = ChaCha8Rng::from_seed(key_from_seed(seed));
    rng.set_stream(stream);
    rng.set_word_pos((index as u128) << WORDS_PER_INDEX_SHIFT);
    rng
}
