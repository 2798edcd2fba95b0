//! Seed splitting.
//!
//! A master seed feeds a ChaCha8 generator; each consumer gets its own
//! stream of that generator, selected by a fixed stream id. ChaCha is
//! counter based, so stream `s` of seed `m` is the same sequence on every
//! platform and independent of how many values other streams consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream ids used by the learners and the command-line runner.
pub mod streams {
    pub const DATA: u64 = 0;
    pub const INIT: u64 = 1;
    pub const ORACLE: u64 = 2;
    pub const TIE_BREAK: u64 = 3;
    pub const MEASURE: u64 = 4;
    /// Sweep point `i` uses stream `SWEEP_BASE + i`.
    pub const SWEEP_BASE: u64 = 1 << 16;
}

pub fn stream(master_seed: u64, stream_id: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id);
    rng
}

/// Derive a child seed for a nested consumer, e.g. one sweep point that then
/// splits into its own streams.
pub fn child_seed(master_seed: u64, stream_id: u64) -> u64 {
    use rand::RngCore;
    stream(master_seed, stream_id).next_u64()
}
