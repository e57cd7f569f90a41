//! Deterministic RNG derivation.
//!
//! Every random draw goes through [`rng`] with an explicit purpose stream, so
//! per-item work can run in any order (or in parallel) and still reproduce.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_MAIN: u64 = 0;
pub const STREAM_LATENT: u64 = 1;
pub const STREAM_VOLUME_NOISE: u64 = 2;
pub const STREAM_LABELS: u64 = 3;
pub const STREAM_AUGMENT: u64 = 4;
pub const STREAM_GMM_INIT: u64 = 5;
pub const STREAM_INIT_WEIGHTS: u64 = 6;
pub const STREAM_SHUFFLE: u64 = 7;
pub const STREAM_GRADCHECK: u64 = 8;

/// RNG for item `index` of a seeded run; the seed is combined as `seed ⊕ index`.
pub fn rng(seed: u64, index: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ index);
    r.set_stream(stream);
    r
}
