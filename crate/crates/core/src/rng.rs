//! Counter-based random substreams.
//!
//! Every replicate draws from its own ChaCha8 stream keyed by the run seed and
//! selected by the replicate index, so replicate `i` is a pure function of
//! `(seed, i)`. Serial and parallel runs, with any worker count, see identical
//! draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Factory for per-replicate generators derived from one 64-bit seed.
#[derive(Debug, Clone)]
pub struct Substreams {
    base: ChaCha8Rng,
}

impl Substreams {
    pub fn new(seed: u64) -> Self {
        Self {
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Generator for replicate `index`, positioned at the start of its stream.
    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(index);
        rng.set_word_pos(0);
        rng
    }
}

/// Derives an independent seed for a named sub-experiment (for example one
/// step of a nesting check) from a parent seed.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
