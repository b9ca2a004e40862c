//! Counter-based random streams. A `(seed, stream)` pair always yields the
//! same ChaCha sequence, independent of what other streams were drawn, which
//! keeps Monte Carlo trials reproducible under any worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A child seed for sub-stream `stream` of `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    stream_rng(seed, stream).gen()
}
