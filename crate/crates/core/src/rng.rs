//! Seed derivation. Every stochastic step draws from a ChaCha stream whose
//! seed is a pure function of the run seed and the step's coordinates, so
//! results do not depend on execution order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

// Stream tags.
pub const TAG_SPLIT: u64 = 0x5350_4c49;
pub const TAG_FOLD: u64 = 0x464f_4c44;
pub const TAG_MODEL: u64 = 0x4d4f_444c;
pub const TAG_TREE: u64 = 0x5452_4545;
pub const TAG_TRIAL: u64 = 0x5452_4941;
pub const TAG_LAYOUT: u64 = 0x4c41_594f;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with a path of coordinates.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_for(base: u64, path: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(base, path))
}
