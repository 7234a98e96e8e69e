//! Deterministic RNG substreams keyed by a seed and a tuple of tags.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Hashes a seed and tags into a single 64-bit key.
pub fn stream_key(seed: u64, tags: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ 0x6C65_6C6F_6E67_0000);
    for &t in tags {
        h = splitmix64(h ^ splitmix64(t.wrapping_add(0x1234_5678)));
    }
    h
}

/// Independent generator for the stratum identified by `tags`.
pub fn substream(seed: u64, tags: &[u64]) -> StreamRng {
    let key = stream_key(seed, tags);
    let mut bytes = [0u8; 32];
    let mut h = key;
    for chunk in bytes.chunks_mut(8) {
        h = splitmix64(h);
        chunk.copy_from_slice(&h.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}
