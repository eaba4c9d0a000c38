//! Seeded random streams.
//!
//! Every sampler draws from ChaCha8 keyed by the user seed. Work that is
//! split across threads uses `stream_rng(seed, k)` for chunk `k`: the same
//! key with ChaCha stream id `k`, so chunks never share keystream and the
//! output does not depend on the thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
