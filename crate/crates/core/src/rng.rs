//! Deterministic, counter-based random streams.
//!
//! Every random draw in the crate comes from a stream addressed by
//! `(seed, time, particle, tag)`. Streams are independent ChaCha8 instances,
//! so the draw sequence for one address never depends on evaluation order or
//! on how work is split across threads: parallel and serial runs are
//! bit-identical.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A single addressed random stream.
pub type Stream = ChaCha8Rng;

/// Purpose of a stream, separating the draws made at one (time, particle) slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum StreamTag {
    /// Initial-particle sampling.
    Init = 1,
    /// Proposal (mutation) draws.
    Proposal = 2,
    /// Resampling draws; one dedicated stream per time step.
    Resample = 3,
    /// Dataset simulation.
    Simulate = 4,
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a new 64-bit seed from `(seed, salt)`.
///
/// Used to key replicates and EM iterations off a single master seed.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut state = seed ^ salt.wrapping_mul(GOLDEN);
    splitmix64(&mut state)
}

/// Master seed plus the stream-derivation rule.
///
/// `stream(time, particle, tag)` always yields the same draw sequence for the
/// same address, for any interleaving of calls.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngContract {
    seed: u64,
    key: [u8; 32],
}

impl RngContract {
    pub fn new(seed: u64) -> Self {
        let mut state = seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        Self { seed, key }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent contract for a sub-experiment (replicate, EM iteration).
    pub fn child(&self, salt: u64) -> Self {
        Self::new(derive_seed(self.seed, salt))
    }

    /// The stream addressed by `(time, particle, tag)`.
    ///
    /// Addresses are packed into the ChaCha stream id, so `time` and
    /// `particle` must each stay below 2^28.
    pub fn stream(&self, time: usize, particle: usize, tag: StreamTag) -> Stream {
        debug_assert!(time < (1 << 28), "time index too large for stream id");
        debug_assert!(particle < (1 << 28), "particle index too large for stream id");
        let id = ((tag as u64) << 56) | ((time as u64) << 28) | particle as u64;
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(id);
        rng
    }
}
