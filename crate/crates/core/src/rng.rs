//! Seed derivation for reproducible, worker-count-independent randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the pipeline.
pub type PipelineRng = ChaCha8Rng;

/// One round of the SplitMix64 finalizer.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with an ordered list of stream coordinates.
pub fn derive_seed(seed: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix64(seed), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

/// A generator keyed by `(seed, coords...)`, independent of who asks for it.
pub fn stream(seed: u64, coords: &[u64]) -> PipelineRng {
    PipelineRng::seed_from_u64(derive_seed(seed, coords))
}
