//! Seed derivation for order-independent random substreams.
//!
//! Every random draw in the crate comes from a ChaCha stream whose seed is a
//! pure function of a master seed and a path of integer keys, so results do
//! not depend on the order in which parallel workers run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `path` into `seed`. Distinct paths give statistically independent seeds.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(seed), |acc, &key| {
        splitmix64(acc ^ splitmix64(key.wrapping_add(0xA076_1D64_78BD_642F)))
    })
}

/// Opens the random stream identified by `(seed, path)`.
pub fn substream(seed: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, path))
}
