//! Seeded random streams.
//!
//! Every random consumer draws from its own ChaCha stream identified by
//! `(seed, stream)`, so results do not depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Combines a stream family tag with an index into one stream id.
pub fn stream_id(family: u32, index: u64) -> u64 {
    ((family as u64) << 40) ^ index
}
