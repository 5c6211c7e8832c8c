//! Splittable seeded random streams.
//!
//! A stream is addressed by `(seed, lane, index)`. The lane separates
//! independent purposes (covariates of a ladder rung, replicate data, ...)
//! and the index is the chunk or replicate number. Each address maps to a
//! distinct ChaCha stream, so work can be split across threads in any order
//! and still reproduce the serial result bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Lane identifiers for the different consumers of randomness.
pub mod lanes {
    pub const MOMENT: u64 = 1;
    pub const LADDER: u64 = 2;
    pub const SWEEP: u64 = 3;
    pub const REPLICATE: u64 = 4;
    pub const RECOVERY: u64 = 5;
    pub const RECOVERY_OUTPUT_NOISE: u64 = 6;

    /// Lane for sub-experiment `sub` (ladder rung, grid point) within `lane`.
    pub fn sub(lane: u64, sub: u64) -> u64 {
        (lane << 32) | (sub & 0xffff_ffff)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream for `(seed, lane, index)`.
pub fn stream(seed: u64, lane: u64, index: u64) -> StreamRng {
    let mut key = [0u8; 32];
    let mut state = seed ^ splitmix64(lane.wrapping_mul(0x2545_f491_4f6c_dd1d));
    for word in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        word.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Plain seeded stream, used where a caller owns a single sequential stream.
pub fn seeded(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}
