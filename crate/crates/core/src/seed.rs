//! Seed derivation. Every random stream in a run is derived from the single
//! master seed, so work can be scheduled in any order without changing
//! results.
//!
//! `derive(master, stream, index)` mixes the three values through
//! splitmix64 finalizers:
//!
//! ```text
//! s = splitmix64(master ^ splitmix64(stream))
//! derive = splitmix64(s + (index + 1) * 0x9E3779B97F4A7C15)
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Stream tags for the components that draw randomness.
pub mod stream {
    pub const BAG_REPLICATE: u64 = 1;
    pub const BAG_MEMBER: u64 = 2;
    pub const BOOST_RESAMPLE: u64 = 3;
    pub const BOOST_MEMBER: u64 = 4;
    pub const SHUFFLE: u64 = 5;
    pub const SYNTH: u64 = 6;
    pub const SYNTH_NOISE: u64 = 7;
    pub const QC: u64 = 8;
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(master: u64, stream: u64, index: u64) -> u64 {
    let s = splitmix64(master ^ splitmix64(stream));
    splitmix64(s.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream_rng(master: u64, stream: u64, index: u64) -> Rng {
    rng(derive(master, stream, index))
}
