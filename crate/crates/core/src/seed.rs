//! Keyed RNG stream derivation.
//!
//! Every random consumer in the crate draws from a ChaCha8 stream whose seed
//! is a mix of the master seed and a tuple of keys (class label, feature
//! name, batch index, ...). Streams are therefore independent of the order in
//! which classes or features are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over the UTF-8 bytes; stable across platforms and toolchains.
pub fn text_key(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn derive(master: u64, keys: &[u64]) -> u64 {
    keys.iter()
        .fold(splitmix(master), |acc, k| splitmix(acc ^ splitmix(*k)))
}

pub fn rng(master: u64, keys: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, keys))
}
