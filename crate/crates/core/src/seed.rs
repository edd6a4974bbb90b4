//! Deterministic seed derivation.
//!
//! Simulations hand every independent random consumer (a link, a
//! replication, a relay) its own ChaCha stream derived from the master
//! seed and a label path. Streams never share state, so reordering or
//! parallelizing consumers cannot change any individual stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a label path into the master seed. Order matters; every distinct
/// path gives an independent-looking value.
pub fn derive(master: u64, labels: &[u64]) -> u64 {
    let mut state = splitmix64(master);
    for &label in labels {
        state = splitmix64(state ^ label.wrapping_mul(0xD134_2543_DE82_EF95));
    }
    state
}

/// A ChaCha stream for the given label path.
pub fn rng_for(master: u64, labels: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, labels))
}
