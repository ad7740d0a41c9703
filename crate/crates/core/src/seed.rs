//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! seeded from a master seed and a stream tag, so parallel jobs draw
//! schedule-independent values.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const STREAM_COHORT: u64 = 1;
pub const STREAM_SPLIT: u64 = 2;
pub const STREAM_TRAIN: u64 = 3;
pub const STREAM_BOOTSTRAP: u64 = 4;
pub const STREAM_INIT: u64 = 5;
pub const STREAM_SHUFFLE: u64 = 6;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for `stream` under `master`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(master: u64, stream: u64) -> Rng {
    rng_from_seed(derive_seed(master, stream))
}
