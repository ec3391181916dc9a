//! Counter-based random streams.
//!
//! Every stochastic component draws from a ChaCha stream addressed by
//! `(seed, stream id)`. Work items (walks, permutations, subset draws) own
//! disjoint stream ids, so results do not depend on execution order and a
//! whole experiment is reproducible from its seed alone.
//!
//! Estimators that must be couplable (e.g. the Owen walk at a single
//! inclusion level against plain Monte-Carlo permutation sampling) share the
//! same `(level, walk, lane)` addressing, which makes their permutations
//! bit-identical under a shared seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Which part of a work item a stream feeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lane {
    /// Bernoulli mask / subset membership draws.
    Mask = 0,
    /// Visit-order shuffles.
    Order = 1,
}

/// An independent generator for the given seed and stream id.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream id for one sampling work item.
///
/// Layout: lane in the top 2 bits, inclusion level in the next 22,
/// walk index in the low 40.
pub fn walk_stream(level: usize, walk: u64, lane: Lane) -> u64 {
    debug_assert!(level < (1 << 22));
    debug_assert!(walk < (1 << 40));
    ((lane as u64) << 62) | ((level as u64) << 40) | walk
}

/// Derives a fresh seed for a named sub-domain of a larger computation.
pub fn derive_seed(seed: u64, domain: u64, index: u64) -> u64 {
    substream(seed, (domain << 48) ^ index).random()
}
