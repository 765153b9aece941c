//! Seed derivation and per-stream generators.
//!
//! Every random draw goes through a ChaCha8 generator keyed by a 64-bit
//! seed mixed with a purpose tag, and positioned on a stream chosen by the
//! caller (constraint index, trial index, ...). ChaCha is counter based, so
//! stream `i` never shares keystream with stream `j` and generation order
//! does not matter.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags that separate independent uses of one user seed.
pub mod tag {
    pub const ORIGINAL: u64 = 0x6f72_6967;
    pub const SYMMETRIC_RELATION: u64 = 0x7273_7461;
    pub const SYMMETRIC_INSTANCE: u64 = 0x7379_6d69;
    pub const TRIAL: u64 = 0x7472_6961;
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive combination of two 64-bit values into a new seed.
pub fn mix(a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(a) ^ b.rotate_left(17) ^ 0x5851_f42d_4c95_7f2d)
}

pub fn stream(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, tag));
    rng.set_stream(index);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a = stream(7, tag::ORIGINAL, 3).next_u64();
        let b = stream(7, tag::ORIGINAL, 3).next_u64();
        let c = stream(7, tag::ORIGINAL, 4).next_u64();
        let e = stream(7, tag::TRIAL, 3).next_u64();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, e);
        assert_ne!(mix(1, 2), mix(2, 1));
    }
}
