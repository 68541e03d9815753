//! Counter-based seeding: replicate `r` of master seed `s` is the ChaCha8
//! keystream with key derived from `s` and stream number `r`.
//!
//! Each replicate owns its own stream, so the values drawn for replicate `r`
//! do not depend on which thread runs it or on how many other replicates
//! were drawn before.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}
