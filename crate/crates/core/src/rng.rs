//! Deterministic seed derivation and per-batch random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Samples drawn from a single ChaCha stream before moving to the next one.
pub const BATCH_SIZE: usize = 4096;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed and a key path.
///
/// The mapping is a fold of SplitMix64 over the keys, so distinct paths give
/// statistically independent seeds and the result does not depend on call
/// order or thread scheduling.
pub fn derive_seed(master: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(splitmix64(master), |acc, &k| {
        splitmix64(acc ^ splitmix64(k))
    })
}

/// The RNG owned by batch `batch` of a sample set seeded with `seed`.
pub fn batch_rng(seed: u64, batch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch as u64);
    rng
}

/// Number of batches needed for `count` samples.
pub fn batch_count(count: usize) -> usize {
    count.div_ceil(BATCH_SIZE)
}

/// Half-open sample index range covered by `batch`.
pub fn batch_range(count: usize, batch: usize) -> std::ops::Range<usize> {
    let start = batch * BATCH_SIZE;
    start..(start + BATCH_SIZE).min(count)
}
