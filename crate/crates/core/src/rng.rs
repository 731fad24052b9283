//! Per-replica random streams.
//!
//! The master seed keys a ChaCha8 generator and the replica id selects its
//! stream, so replica `i` draws the same numbers whichever thread runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ReplicaRng = ChaCha8Rng;

/// Independent stream for `(master_seed, replica_id)`.
pub fn replica_rng(master_seed: u64, replica_id: u64) -> ReplicaRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replica_id);
    rng
}

/// Uniform draw in `(0, 1]`, suitable for `-ln(u)`.
#[inline]
pub fn open_unit<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}
