//! Seeded randomness.
//!
//! Every stochastic routine draws from [`StudyRng`], ChaCha with 8 rounds
//! (`rand_chacha` 0.3, `ChaCha8Rng::seed_from_u64`). Replication `i` of a study
//! with base seed `s` is seeded with [`mix_seed`]`(s, i)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StudyRng = ChaCha8Rng;

/// SplitMix64 finaliser.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replication `index` under `base_seed`:
/// `splitmix64(base_seed ^ splitmix64(index))`.
pub fn mix_seed(base_seed: u64, index: u64) -> u64 {
    splitmix64(base_seed ^ splitmix64(index))
}

pub fn rng_from_seed(seed: u64) -> StudyRng {
    ChaCha8Rng::seed_from_u64(seed)
}
