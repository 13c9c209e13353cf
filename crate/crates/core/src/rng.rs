//! Counter-based random stream derivation.
//!
//! Every consumer of randomness asks for a stream keyed by a root seed and a
//! path of integers (a tag plus indices). Streams never share state, so the
//! order in which independent work items run cannot change their draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type StreamRng = ChaCha8Rng;

pub mod tag {
    pub const SHADOWING: u64 = 0x5348_4144;
    pub const OCCUPANTS: u64 = 0x4f43_4355;
    pub const AP: u64 = 0x4150_4c43;
    pub const PAIR: u64 = 0x5041_4952;
    pub const CANDIDATES: u64 = 0x4341_4e44;
    pub const ENCODE: u64 = 0x454e_4344;
    pub const DREAM: u64 = 0x4452_4541;
    pub const RANDOM_RULE: u64 = 0x5241_4e44;
    pub const INIT: u64 = 0x494e_4954;
    pub const EPISODE: u64 = 0x4550_4953;
    pub const HOLDOUT: u64 = 0x484f_4c44;
    pub const SUBSAMPLE: u64 = 0x5355_4253;
    pub const GP_POINTS: u64 = 0x4750_5054;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `path` into `root` to produce a child seed.
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix(root), |acc, &p| splitmix(acc ^ splitmix(p)))
}

pub fn stream(root: u64, path: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, path))
}

pub fn normals(rng: &mut StreamRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}
