//! Seed derivation. Every random stream in the crate is a ChaCha generator
//! keyed by a seed derived from the caller's seed plus a path of integer
//! tags (fold index, bootstrap replicate, Monte-Carlo run, ...), so work can
//! be scheduled in any order without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix `tags` into `base`. Distinct tag paths give unrelated seeds.
pub fn derive(base: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(base), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rng_for(base: u64, tags: &[u64]) -> Rng {
    rng(derive(base, tags))
}

// Tag namespaces so derived streams used by different stages never collide.
pub(crate) const TAG_FOLDS: u64 = 0x466f_6c64;
pub(crate) const TAG_BOOTSTRAP: u64 = 0x426f_6f74;
pub(crate) const TAG_ALEATORIC: u64 = 0x416c_6561;
pub(crate) const TAG_FIT: u64 = 0x4669_74;
pub(crate) const TAG_FILTER: u64 = 0x4669_6c74;
pub(crate) const TAG_CORRUPT: u64 = 0x436f_7272;
pub(crate) const TAG_RUN: u64 = 0x5275_6e;
pub(crate) const TAG_SPLIT: u64 = 0x5370_6c74;
