//! Counter-keyed random streams.
//!
//! Every consumer derives its generator from a master seed plus a tuple of
//! coordinates, so results never depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One SplitMix64 finalization step.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a key tuple into a 64-bit seed.
pub fn derive_seed(seed: u64, key: &[u64]) -> u64 {
    key.iter().fold(mix(seed), |acc, &k| mix(acc ^ mix(k)))
}

/// Generator for one stream position.
pub fn keyed_rng(seed: u64, key: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, key))
}

/// Stream tags keep independent consumers from sharing keys.
pub mod stream {
    pub const EVENT_NOISE: u64 = 1;
    pub const PERTURBATION: u64 = 2;
    pub const TRIGGER_JITTER: u64 = 3;
    pub const SCENE: u64 = 4;
}
