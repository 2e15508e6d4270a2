//! Seed derivation. Every random stream is a ChaCha8 generator keyed by a
//! stable hash so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TAG_SYMBOLS: u64 = 1;
pub const TAG_TX_PHASE: u64 = 2;
pub const TAG_TRAJECTORY: u64 = 3;
pub const TAG_EXCESS: u64 = 4;
pub const TAG_LO_PHASE: u64 = 5;
pub const TAG_DETECT_V: u64 = 6;
pub const TAG_DETECT_H: u64 = 7;
pub const TAG_CAL_SHOT: u64 = 8;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(parent: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ tag.rotate_left(17))
}

/// Per-trial seed from (master seed, scrambling rate, trial index).
pub fn trial_seed(master: u64, sr: f64, trial: u64) -> u64 {
    let sr_bits = if sr == 0.0 { 0 } else { sr.to_bits() };
    derive_seed(derive_seed(master, sr_bits), trial)
}

pub fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag))
}
