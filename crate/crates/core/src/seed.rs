//! Named random substreams derived from one master seed.
//!
//! Every consumer of randomness (environment resets, weight init, action
//! sampling, minibatch shuffling, bootstrap resampling) draws from its own
//! ChaCha stream so that changing one consumer never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    EnvReset = 1,
    PolicyInit = 2,
    ActionSampling = 3,
    MinibatchShuffle = 4,
    Bootstrap = 5,
    Evaluation = 6,
    Guidance = 7,
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combines two words into one seed; order matters.
pub fn combine(a: u64, b: u64) -> u64 {
    mix64(mix64(a) ^ b.rotate_left(17))
}

pub fn stream_rng(master: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream as u64);
    rng
}

/// Substream `index` of a named stream, e.g. one per rollout worker.
pub fn indexed_rng(master: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(combine(master, index));
    rng.set_stream(stream as u64);
    rng
}

/// Seed for the episode started by `reset(seed)`.
pub fn episode_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
