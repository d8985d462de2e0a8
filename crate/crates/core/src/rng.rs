//! Seed derivation. Every run has one root seed; each consumer draws from its
//! own ChaCha stream so that adding draws in one place never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Independent random streams derived from a run's root seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Env = 1,
    Learner = 2,
    Planner = 3,
    Exploration = 4,
    Evaluation = 5,
    Replay = 6,
}

pub fn stream(root_seed: u64, which: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root_seed);
    rng.set_stream(which as u64);
    rng
}

/// A child stream for an indexed sub-task (an evaluation round, a trial).
pub fn substream(root_seed: u64, which: Stream, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root_seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(which as u64);
    rng
}
