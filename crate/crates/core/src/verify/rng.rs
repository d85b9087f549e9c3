//! Per-path random streams.
//!
//! Every path owns two ChaCha8 streams keyed by `(seed, 2 * index + k)`:
//! `k = 0` feeds the Brownian increments, `k = 1` the exponential clocks.
//! A path's draws therefore do not depend on which thread runs it or on how
//! many steps other paths took.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const NORMAL_STREAM: u64 = 0;
pub const CLOCK_STREAM: u64 = 1;

pub fn path_rng(seed: u64, path: u64, kind: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path.wrapping_mul(2).wrapping_add(kind));
    rng
}

/// Sum with `O(log n)` error growth and an order fixed by the input layout.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
