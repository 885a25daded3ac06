//! Reproducible random streams.
//!
//! Every random quantity in a simulation is drawn from a generator that is a
//! pure function of a root seed and a path of integer labels (trial index,
//! user, cluster, ray, ...). Any subset of streams can therefore be
//! regenerated in any order, on any worker, with bit-identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator type used for all simulation streams.
pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        StreamKey(mix(seed))
    }

    /// Derive the sub-stream identified by `label`.
    pub fn child(self, label: u64) -> Self {
        StreamKey(mix(self.0 ^ mix(label ^ 0x5851_f42d_4c95_7f2d)))
    }

    pub fn rng(self) -> StreamRng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    pub fn raw(self) -> u64 {
        self.0
    }
}
