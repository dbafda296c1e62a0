//! Seeded random streams.
//!
//! Every stochastic step in the crate draws from a `ChaCha8Rng` whose seed is
//! derived from the run's root seed, so results never depend on thread
//! scheduling or on the platform's default generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

/// A generator for `seed`, positioned on an independent ChaCha stream.
pub fn stream(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer. A bijection on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for a `(fold, trial)` pair.
///
/// Injective for fixed `root` as long as both indices fit in 32 bits: the
/// pair is packed into one word, xored with the root and passed through a
/// bijective mixer.
pub fn child_seed(root: u64, fold: u32, trial: u32) -> u64 {
    mix64(root ^ (((fold as u64) << 32) | trial as u64))
}
