//! Counter-based random streams.
//!
//! A stream is addressed by `(seed, replication, role)`: the seed keys a
//! ChaCha8 generator and `(replication, role)` selects its stream, so the
//! design and the errors of one replication can be redrawn independently
//! and no draw depends on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamRole {
    Design = 1,
    Error = 2,
}

pub fn stream(seed: u64, replication: u64, role: StreamRole) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((replication << 8) | role as u64);
    rng
}
