//! Deterministic random-number plumbing.
//!
//! Every source of randomness in a run is a ChaCha stream addressed by
//! `(master seed, stream index)`. Replications get disjoint stream blocks, so
//! they can run in parallel and still reproduce bit-identically; the
//! population layout lives in a stream of its own and is therefore shared by
//! all replications of the same seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Fixed stream indices below `REPLICATION_BASE`.
pub const STREAM_POPULATION: u64 = 0;
pub const STREAM_MEAN_ESTIMATION: u64 = 1;

const REPLICATION_BASE: u64 = 16;
const STREAMS_PER_REPLICATION: u64 = 4;

/// Per-replication randomness roles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplicationStream {
    Traffic = 0,
    Prediction = 1,
    Policy = 2,
    Reward = 3,
}

/// RNG for one of the fixed global streams.
pub fn global_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    debug_assert!(stream < REPLICATION_BASE);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// RNG for one role within one replication.
pub fn replication_rng(seed: u64, replication: u64, role: ReplicationStream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(REPLICATION_BASE + replication * STREAMS_PER_REPLICATION + role as u64);
    rng
}

/// Uniform index in `0..n` that consumes randomness only when there is an
/// actual choice to make. Selection code relies on this so that degenerate
/// draws (a single candidate) leave the stream untouched.
pub fn uniform_index<R: Rng + ?Sized>(n: usize, rng: &mut R) -> usize {
    debug_assert!(n > 0);
    if n == 1 {
        0
    } else {
        rng.random_range(0..n)
    }
}

/// Uniform sample of `k` items without replacement, by partial Fisher–Yates.
/// Draws one index per picked item (none for forced picks).
pub fn sample_without_replacement<T, R: Rng + ?Sized>(
    mut items: Vec<T>,
    k: usize,
    rng: &mut R,
) -> Vec<T> {
    let k = k.min(items.len());
    for i in 0..k {
        let j = i + uniform_index(items.len() - i, rng);
        items.swap(i, j);
    }
    items.truncate(k);
    items
}
