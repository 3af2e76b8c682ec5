//! Counter-style seed derivation.
//!
//! Each trial gets its own generator seeded from `(master_seed, trial_index)`
//! alone, so any split of trials across workers reproduces the serial run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial_index` under `master_seed`.
#[inline]
pub fn trial_seed(master_seed: u64, trial_index: u64) -> u64 {
    mix64(mix64(master_seed).wrapping_add(GOLDEN_GAMMA.wrapping_mul(trial_index.wrapping_add(1))))
}

/// Independent sub-stream of a trial seed, e.g. for the several matrices an
/// oracle instance needs.
#[inline]
pub fn substream(seed: u64, stream: u64) -> u64 {
    trial_seed(seed ^ 0xD1B5_4A32_D192_ED03, stream)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
