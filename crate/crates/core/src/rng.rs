//! Seeded random streams.
//!
//! Every stochastic component draws from a [`ChaCha8Rng`] whose seed is
//! derived from a root seed and a list of stream coordinates, so a stream is
//! a pure function of `(seed, coordinates)` and independent of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a root seed with stream coordinates into a single 64-bit seed.
pub fn derive_seed(seed: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix64(seed), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

pub fn stream(seed: u64, coords: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, coords))
}

// Stream tags, kept distinct so that no two components share a stream.
pub(crate) const TAG_SYNTH: u64 = 1;
pub(crate) const TAG_SPLIT: u64 = 2;
pub(crate) const TAG_SHUFFLE: u64 = 3;
pub(crate) const TAG_WALK: u64 = 4;
pub(crate) const TAG_INIT: u64 = 5;
pub(crate) const TAG_NEGATIVES: u64 = 6;
pub(crate) const TAG_DEEPWALK: u64 = 7;
