//! Seeded, platform-independent random streams.
//!
//! Every stochastic draw in a run goes through a ChaCha8 stream derived from
//! the run seed. Distinct subsystems get distinct stream ids so that adding
//! draws to one never shifts the sequence seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream id for transaction generation.
pub const STREAM_DATAGEN: u64 = 1;
/// Stream id for network and validation latencies.
pub const STREAM_NETWORK: u64 = 2;
/// Stream id for votes of randomly voting validators.
pub const STREAM_FAULTS: u64 = 3;

pub fn stream(seed: u64, stream_id: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}
