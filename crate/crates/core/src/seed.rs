//! Seed derivation.
//!
//! Every random stream in the pipeline is keyed by `(global seed, purpose tag,
//! indices)`. Derived seeds depend only on those values, so re-running a single
//! fold or grid point reproduces exactly the stream the full run used.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed, a purpose tag and a list of indices.
pub fn derive_seed(seed: u64, tag: &str, indices: &[u64]) -> u64 {
    // FNV-1a over the tag keeps the mapping stable across builds and platforms.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    let mut state = splitmix64(seed ^ h);
    for &i in indices {
        state = splitmix64(state ^ splitmix64(i));
    }
    state
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
