//! Child-seed derivation.
//!
//! Every stochastic consumer draws its own seed from the master seed with
//! [`child`], keyed by a stream tag and a counter. Seeds therefore never
//! depend on execution order, which keeps serial and parallel runs
//! identical.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags, one per kind of consumer.
pub mod stream {
    pub const TREE: u64 = 1;
    pub const FOLDS: u64 = 2;
    pub const TRIAL: u64 = 3;
    pub const SAMPLER: u64 = 4;
    pub const FEATURE: u64 = 5;
    pub const LANG_SAMPLE: u64 = 6;
    pub const MODEL: u64 = 7;
    pub const STUDY: u64 = 8;
    pub const OUTER_FOLD: u64 = 9;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix64(splitmix64(master ^ splitmix64(stream)) ^ index)`.
pub fn child(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(stream)) ^ index)
}

/// FNV-1a over the bytes of `s`; stable across platforms and toolchains.
pub fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn child_seeds_differ_by_stream_and_index() {
        let a = child(7, stream::TREE, 0);
        assert_ne!(a, child(7, stream::TREE, 1));
        assert_ne!(a, child(7, stream::FOLDS, 0));
        assert_ne!(a, child(8, stream::TREE, 0));
        assert_eq!(a, child(7, stream::TREE, 0));
    }

    #[test]
    fn fnv_known_value() {
        assert_eq!(hash_str(""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(hash_str("a"), 0xaf63_dc4c_8601_ec8c);
    }
}
