//! Seed derivation. Every random stream in a trial is keyed by a tuple of
//! integers so that results do not depend on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags mixed into derived seeds.
pub mod stream {
    pub const INIT: u64 = 1;
    pub const MODEL: u64 = 2;
    pub const TRAIN: u64 = 3;
    pub const QUERY: u64 = 4;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `parts` into `base`. Distinct tuples give unrelated seeds.
pub fn derive(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
