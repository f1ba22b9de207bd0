//! Seed derivation for independent random streams.
//!
//! Every random draw in the crate comes from a ChaCha stream keyed by a base
//! seed plus a tuple of integer tags (layer, bond, realization, ...). Streams
//! never depend on evaluation order, so parallel and sequential runs agree.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Domain-separation tags.
pub const TAG_GATE: u64 = 0x6761_7465;
pub const TAG_REALIZATION: u64 = 0x7265_616c;
pub const TAG_CIRCUIT: u64 = 0x6369_7263;
pub const TAG_LABELS: u64 = 0x6c61_6273;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `tags` into `base`, producing a well-separated 64-bit key.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(base), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn stream(base: u64, tags: &[u64]) -> StreamRng {
    let key = derive_seed(base, tags);
    let mut seed = [0u8; 32];
    let mut s = key;
    for chunk in seed.chunks_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}
