//! Seeded counter-based random streams.
//!
//! A stream is identified by `(seed, stream_id)`. The generator is ChaCha8
//! with the 64-bit stream id in the nonce, so independent replicates never
//! share a keystream and the mapping is identical on every platform and
//! thread count.

use rand::distr::{Distribution, Open01};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Recorded in run manifests.
pub const GENERATOR: &str = "ChaCha8 (rand_chacha 0.9); seed_from_u64(seed), set_stream(id)";

pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64, stream_id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

#[inline]
pub fn standard_normal(rng: &mut StreamRng) -> f64 {
    StandardNormal.sample(rng)
}

/// Uniform draw on the open interval (0, 1).
#[inline]
pub fn open_uniform(rng: &mut StreamRng) -> f64 {
    Open01.sample(rng)
}
