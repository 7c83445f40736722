//! Reproducible random streams.
//!
//! Every random quantity in the library is drawn from a ChaCha8 generator, a
//! counter-based cipher RNG. A `(seed, stream)` pair selects an independent
//! keystream: the 64-bit seed is expanded into the 256-bit key and the stream
//! id is written into the ChaCha nonce. Samplers reserve stream 0 for global
//! choices (latent counts, labelings, shuffles) and stream `k + 1` for the
//! k-th latent pair, so the draw for a given pair does not depend on how many
//! rejections earlier pairs needed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Generator for stream `stream` under `seed`.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for replicate `index` of a sweep tagged `tag`.
pub fn derive_seed(base: u64, tag: u64, index: u64) -> u64 {
    mix64(mix64(base ^ mix64(tag)) ^ index)
}
