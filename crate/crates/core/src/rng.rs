//! Reproducible random streams.
//!
//! Every random draw in the crate comes from a [`SeedSpec`], a `(seed, stream)`
//! pair mapped onto a ChaCha8 generator: the seed fills the 256-bit key and the
//! stream selects one of the 2^64 independent ChaCha streams. ChaCha is a
//! counter-based generator, so replication `r` of a study simply uses stream `r`
//! and no generator state is ever shared between workers.
//!
//! This mapping is frozen; the regression suite depends on it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The generator family used everywhere in the crate.
pub type GwRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub seed: u64,
    pub stream: u64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl SeedSpec {
    pub fn new(seed: u64, stream: u64) -> Self {
        SeedSpec { seed, stream }
    }

    /// Same seed, different stream.
    pub fn with_stream(self, stream: u64) -> Self {
        SeedSpec { stream, ..self }
    }

    /// A derived key for an independent purpose (e.g. simulation vs. estimation
    /// within one replication). The stream index is kept.
    pub fn lane(self, lane: u64) -> Self {
        SeedSpec { seed: splitmix64(self.seed ^ splitmix64(lane.wrapping_add(1))), stream: self.stream }
    }

    pub fn rng(self) -> GwRng {
        let mut key = [0u8; 32];
        let mut state = self.seed;
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream);
        rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_spec_same_draws() {
        let a: Vec<u64> = SeedSpec::new(7, 3).rng().random_iter().take(8).collect();
        let b: Vec<u64> = SeedSpec::new(7, 3).rng().random_iter().take(8).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn streams_and_lanes_differ() {
        let base: u64 = SeedSpec::new(7, 3).rng().random();
        let other_stream: u64 = SeedSpec::new(7, 4).rng().random();
        let other_lane: u64 = SeedSpec::new(7, 3).lane(1).rng().random();
        assert_ne!(base, other_stream);
        assert_ne!(base, other_lane);
        assert_ne!(other_stream, other_lane);
    }
}
