//! Reproducible random streams.
//!
//! Every random draw in the crate comes from ChaCha8 keyed by a 64-bit seed
//! (expanded with `seed_from_u64`) and a 64-bit stream id. ChaCha is a counter
//! based cipher, so `(seed, stream)` fixes the whole sequence on every
//! platform, independent of thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Generator for stream `stream` under `seed`.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Combines two ids into one stream id (used for per-item, per-trial streams).
pub fn stream_id(major: u64, minor: u64) -> u64 {
    major.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ minor.rotate_left(29)
}
