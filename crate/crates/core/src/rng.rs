//! Seedable substream derivation for reproducible parallel experiments.
//!
//! All randomized routines take either an explicit RNG or a 64-bit seed.
//! Parallel work units (trials, restarts) draw from independent ChaCha
//! streams keyed by the master seed, so results do not depend on thread
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// An independent random stream for work unit `stream` under `seed`.
///
/// Streams with distinct ids never overlap: the generator is keyed by the
/// master seed and the ChaCha stream counter selects a disjoint keystream.
pub fn substream(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream.into());
    rng
}

/// A derived 64-bit seed for a named sub-purpose (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
