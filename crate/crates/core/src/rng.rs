//! Reproducible random streams.
//!
//! Every stochastic component draws from a [`Stream`] obtained through
//! [`derive_stream`]. A stream is a ChaCha8 generator keyed by a SHA-256 digest
//! of the master seed and an index path, so a stream depends only on its path
//! and never on the order in which other streams were created.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Stream = ChaCha8Rng;

const DOMAIN: &[u8] = b"nvmsim/stream/v1";

/// Derives an independent stream for `path` under `master_seed`.
///
/// Typical paths are `[sweep_cell, seed_replica]` or
/// `[sweep_cell, seed_replica, row, col]`.
pub fn derive_stream(master_seed: u64, path: &[u64]) -> Stream {
    let mut h = Sha256::new();
    h.update(DOMAIN);
    h.update(master_seed.to_le_bytes());
    h.update((path.len() as u64).to_le_bytes());
    for idx in path {
        h.update(idx.to_le_bytes());
    }
    let key: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(key)
}
