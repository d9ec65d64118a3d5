//! Seedable random streams.
//!
//! Every stochastic routine draws from ChaCha8. Independent chains get their
//! own stream of the same keyed generator, so results do not depend on how
//! chains are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the crate.
pub type StreamRng = ChaCha8Rng;

/// Recorded in checkpoint and manifest metadata.
pub const RNG_ALGORITHM: &str = "chacha8-seed_from_u64-stream";

pub fn seeded(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream `stream` of the generator keyed by `seed`.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
