//! Counter-based random substreams.
//!
//! Every (trial, stream) pair maps to its own ChaCha8 keystream position, so
//! a trial draws the same numbers no matter which worker runs it or in what
//! order trials are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream slot used for the high-mobility user's channel.
pub const STREAM_U0: u32 = 0;
/// Stream slot used for scheduler randomness.
pub const STREAM_SCHEDULER: u32 = u32::MAX;
/// Stream slot used for noise and symbol generation in signal-level runs.
pub const STREAM_SIGNAL: u32 = u32::MAX - 1;

/// Each substream owns 2^40 keystream words.
const WORDS_PER_STREAM_LOG2: u32 = 40;

/// Derives independent generators from one 64-bit master seed.
#[derive(Debug, Clone)]
pub struct Substreams {
    base: ChaCha8Rng,
}

impl Substreams {
    pub fn new(master_seed: u64) -> Self {
        Substreams {
            base: ChaCha8Rng::seed_from_u64(master_seed),
        }
    }

    /// Generator for `stream` within trial `trial`. Low-mobility user `i`
    /// (1-based) uses stream `i`; see the `STREAM_*` constants for the rest.
    pub fn stream(&self, trial: u64, stream: u32) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(trial);
        rng.set_word_pos(u128::from(stream) << WORDS_PER_STREAM_LOG2);
        rng
    }
}
