//! Named, hashed random streams.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] keyed by
//! `(master seed, purpose, index)`. Workers never share a generator, so the
//! results do not depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Stable 64-bit key for a sub-stream. Independent of platform and Rust version.
pub fn stream_key(seed: u64, purpose: &str, index: u64) -> u64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ fnv1a(purpose.as_bytes()));
    splitmix64(h ^ splitmix64(index))
}

pub fn stream(seed: u64, purpose: &str, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(stream_key(seed, purpose, index))
}

/// A seed derived for a nested component (e.g. one ensemble member).
pub fn derive_seed(seed: u64, purpose: &str, index: u64) -> u64 {
    stream_key(seed, purpose, index)
}
