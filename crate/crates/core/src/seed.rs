//! Reproducible seed derivation.
//!
//! Trial `i` of a campaign gets `derive(base, i)`, so extending a campaign
//! never reshuffles the seeds of earlier trials.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random source used everywhere in the crate.
pub type SimRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed `index` of `base`.
pub fn derive(base: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base).wrapping_add(GOLDEN.wrapping_mul(index.wrapping_add(1))))
}

pub fn rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
