//! Deterministic random substreams.
//!
//! Every stochastic routine derives its generator from a user seed plus a
//! path of integer labels (restart index, chunk index, ...). Work split
//! across threads therefore draws the same numbers regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Fixed chunk length for chunked Monte Carlo loops.
pub const CHUNK: usize = 1 << 14;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a seed with a path of labels into a new 64-bit seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &label| splitmix64(acc ^ splitmix64(label)))
}

/// Generator for the substream `(seed, path...)`.
pub fn substream(seed: u64, path: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}

/// Stream labels, so independent consumers of one seed never collide.
pub mod label {
    pub const SAMPLE: u64 = 1;
    pub const RESTART: u64 = 2;
    pub const NET: u64 = 3;
    pub const DATA: u64 = 4;
    pub const FIT: u64 = 5;
    pub const LEMMA: u64 = 6;
    pub const EVAL: u64 = 7;
    pub const REFERENCE: u64 = 8;
}
