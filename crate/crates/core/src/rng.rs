//! Seed derivation and random streams.
//!
//! Every random quantity in the crate is drawn from a `ChaCha8Rng` whose seed
//! is derived from a user seed and a path of stream indices
//! (`[replicate]`, `[design, n_index, replicate]`, ...) by SplitMix64 mixing.
//! Results therefore depend only on `(seed, indices)` and never on the order
//! in which parallel workers pick up replicates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifier of the generator and derivation scheme, written into run manifests.
pub const RNG_ALGORITHM: &str = "chacha8+splitmix64-streams/v1";

pub type StreamRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a path of stream indices.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(seed), |acc, &idx| {
        splitmix64(acc ^ splitmix64(idx.wrapping_add(0x632b_e59b_d9b4_e019)))
    })
}

/// Generator for a top-level seed.
pub fn rng_from_seed(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for stream `path` under `seed`.
pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}
