//! Seeded random streams.
//!
//! Every stochastic draw comes from ChaCha8 (ChaCha with 8 rounds, as
//! implemented by `rand_chacha`). The 256-bit key is expanded from
//! the user seed with `SeedableRng::seed_from_u64`, and each purpose and
//! shard gets its own ChaCha stream id `purpose << 48 | shard`. Streams never
//! overlap, so splitting work into shards does not change any draw.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    RowChoice = 1,
    OutcomeChoice = 2,
    HiddenState = 3,
    Settings = 4,
    MeasurementTime = 5,
    ModelGeneration = 6,
    ProbeTime = 7,
}

pub fn stream(seed: u64, purpose: Purpose, shard: u64) -> ChaCha8Rng {
    debug_assert!(shard < 1 << 48);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose as u64) << 48 | shard);
    rng
}

/// Uniform on `[0, 1)` from the top 53 bits of one `u64`.
pub fn unit_f64(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Index of the first cumulative threshold above `u`.
pub fn pick(cumulative: &[f64], u: f64) -> usize {
    cumulative.iter().position(|&c| u < c).unwrap_or(cumulative.len() - 1)
}
