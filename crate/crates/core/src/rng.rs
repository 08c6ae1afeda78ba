//! Deterministic seed derivation so results do not depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a root seed with a path of tags (model index, replicate, chunk, ...).
pub fn derive_seed(root: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(root), |acc, &t| {
        splitmix64(acc ^ splitmix64(t.wrapping_add(0x632B_E59B_D9B4_E019)))
    })
}

pub fn rng_from(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(root: u64, tags: &[u64]) -> Rng {
    rng_from(derive_seed(root, tags))
}
