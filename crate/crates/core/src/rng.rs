//! Seeded random streams.
//!
//! Every stochastic component draws from a ChaCha8 stream keyed by
//! `(seed, tag)` with the per-item index selecting the ChaCha stream id. Two
//! streams that differ in any of the three coordinates are independent, so
//! rollouts can be farmed out to worker threads without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags used across the crate. Keeping them in one place keeps the
/// training, evaluation and sampling streams disjoint.
pub mod tag {
    pub const ROLLOUT: u64 = 0x01;
    pub const EVALUATION: u64 = 0x02;
    pub const LSTD_SAMPLES: u64 = 0x03;
    pub const LOCAL_SOLVER: u64 = 0x04;
    pub const ANCHORS: u64 = 0x05;
    pub const NN_REFRESH: u64 = 0x06;
    pub const DISCRETIZE: u64 = 0x07;
    pub const CLASS_ORDER: u64 = 0x08;
    pub const VALIDATION: u64 = 0x09;
    pub const Q_SAMPLES: u64 = 0x0a;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a sub-seed, e.g. one per IHOMP update, from a parent seed.
pub fn derive(seed: u64, salt: u64) -> u64 {
    splitmix64(seed ^ splitmix64(salt.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

pub fn stream(seed: u64, tag: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, tag));
    rng.set_stream(index);
    rng
}
