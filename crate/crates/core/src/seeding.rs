//! Stable seed derivation for independent replications.
//!
//! A replication seed is obtained by folding each path component into the
//! master seed with the SplitMix64 finalizer:
//!
//! ```text
//! h = mix(master)
//! for c in path: h = mix(h ^ mix(c + 0x9E3779B97F4A7C15))
//! ```
//!
//! The derivation depends only on the inputs, never on scheduling, so the
//! same replication sees the same stream on any number of workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator type used for all simulation streams.
pub type SimRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(mix(master), |h, &c| mix(h ^ mix(c.wrapping_add(GOLDEN))))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}
