//! Seeded random streams.
//!
//! Every sampler in the crate draws from a [`StreamRng`]. A run is described
//! by one root seed; independent consumers (ensemble members, the train/test
//! samplers of a replication, the validation split) each get their own stream
//! selected by a fixed index, so results do not depend on execution order or
//! thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream indices reserved for non-member consumers. Members use `0..T`.
pub mod purpose {
    pub const TRAIN: u64 = 1 << 62;
    pub const TEST: u64 = TRAIN + 1;
    pub const VALIDATION_SPLIT: u64 = TRAIN + 2;
    pub const TEST_SPLIT: u64 = TRAIN + 3;
}

/// Independent stream `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Seed of replication `rep` under a root seed.
pub fn replication_seed(root: u64, rep: usize) -> u64 {
    root.wrapping_add(rep as u64)
}
