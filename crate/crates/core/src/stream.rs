//! Reproducible random streams.
//!
//! Every Monte Carlo replicate owns its own generator. The generator for
//! replicate `k` is a ChaCha8 instance keyed by `(seed, stream_id)` and set to
//! stream `k`, so a replicate's draws depend only on those three numbers and
//! never on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type RandomStream = ChaCha8Rng;

/// A stand-alone stream from an explicit seed.
pub fn seeded(seed: u64) -> RandomStream {
    ChaCha8Rng::seed_from_u64(seed)
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(a: u64, b: u64) -> u64 {
    let mut state = a ^ b.rotate_left(32);
    splitmix64(&mut state) ^ splitmix64(&mut state).rotate_left(17)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct McParams {
    pub replicates: usize,
    pub seed: u64,
    pub stream_id: u64,
}

impl McParams {
    pub fn new(replicates: usize, seed: u64) -> Result<Self> {
        let mc = McParams {
            replicates,
            seed,
            stream_id: 0,
        };
        mc.validate()?;
        Ok(mc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::Domain(format!(
                "replicates must be at least 2, got {}",
                self.replicates
            )));
        }
        Ok(())
    }

    pub fn with_replicates(self, replicates: usize) -> Self {
        McParams { replicates, ..self }
    }

    /// A disjoint namespace derived from this one.
    pub fn substream(self, tag: u64) -> Self {
        McParams {
            stream_id: mix(self.stream_id, tag.wrapping_add(1)),
            ..self
        }
    }

    pub fn replicate_stream(&self, k: u64) -> RandomStream {
        let mut state = mix(self.seed, self.stream_id);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(k);
        rng
    }
}
