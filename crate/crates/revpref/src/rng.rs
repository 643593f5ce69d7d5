//! Reproducible random streams.
//!
//! Every stochastic component draws from a ChaCha8 stream addressed by
//! `(root seed, stream id)`. Stream ids are assigned by role — one per
//! bootstrap replication, per (grid point, replication) pair, or per
//! simulated household — so parallel execution order cannot affect any
//! result.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// An independent generator for the given root seed and stream id.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream id for bootstrap replication `r` at grid point `g`
/// (`g = 0` for the plain, non-inverted test).
pub fn bootstrap_stream(grid_index: usize, replication: usize) -> u64 {
    ((grid_index as u64) << 32) | (replication as u64 & 0xffff_ffff)
}

/// Stream id for simulated household `n` of period `t`.
pub fn household_stream(period: usize, household: usize) -> u64 {
    ((period as u64) << 40) | (household as u64 & 0xff_ffff_ffff)
}
