//! Seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` keyed by a 64-bit seed.
//! Child seeds are derived from a parent seed and a stream label with a
//! SplitMix64 finalizer, so the seed of window `t` or repetition `r` does not
//! depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream labels, so unrelated consumers of one parent seed never collide.
pub mod stream {
    pub const WINDOW: u64 = 0x5749_4e44;
    pub const REPETITION: u64 = 0x5245_5045;
    pub const SEGMENT: u64 = 0x5345_474d;
    pub const PLACEMENT: u64 = 0x504c_4143;
    pub const INPUT: u64 = 0x494e_5055;
    pub const NOISE: u64 = 0x4e4f_4953;
    pub const BASE: u64 = 0x4241_5345;
    pub const SIGNAL: u64 = 0x5349_474e;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `parent`, a stream label and an index.
pub fn derive(parent: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent ^ splitmix64(stream)) ^ index)
}

pub fn rng_from(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn child_rng(parent: u64, stream: u64, index: u64) -> Rng {
    rng_from(derive(parent, stream, index))
}
