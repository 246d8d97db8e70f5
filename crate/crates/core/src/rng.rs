//! Counter-based random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha stream whose key
//! and stream id are pure functions of a [`StreamKey`]. Workers never share a
//! generator, so the order in which replicates are scheduled cannot change a
//! single bit of the output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Coordinates of one independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub seed: u64,
    pub experiment: u64,
    pub cell: u64,
    pub replicate: u64,
    pub subsample: u64,
}

impl StreamKey {
    pub const fn new(seed: u64, experiment: u64) -> Self {
        Self {
            seed,
            experiment,
            cell: 0,
            replicate: 0,
            subsample: 0,
        }
    }

    pub const fn with_cell(self, cell: u64) -> Self {
        Self { cell, ..self }
    }

    pub const fn with_replicate(self, replicate: u64) -> Self {
        Self { replicate, ..self }
    }

    pub const fn with_subsample(self, subsample: u64) -> Self {
        Self { subsample, ..self }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut state = splitmix64(self.seed ^ 0x6a09_e667_f3bc_c908);
        state = splitmix64(state ^ self.experiment);
        state = splitmix64(state ^ self.cell);
        let mut key = [0u8; 32];
        let mut s = state;
        for chunk in key.chunks_exact_mut(8) {
            s = splitmix64(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        let stream = splitmix64(self.replicate.rotate_left(32) ^ splitmix64(self.subsample));
        rng.set_stream(stream);
        rng
    }
}

/// Stable 64-bit identifier for an experiment name (FNV-1a).
pub const fn experiment_id(name: &str) -> u64 {
    let bytes = name.as_bytes();
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    let mut i = 0;
    while i < bytes.len() {
        hash ^= bytes[i] as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        i += 1;
    }
    hash
}

const fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
