//! Seeded random streams.
//!
//! Every random draw in the crate comes from a [`Stream`] created from an
//! explicit seed. Sub-seeds are derived by hashing, so one run seed yields
//! stable, independent streams per worker and per purpose.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stable sub-seed for `(seed, parts...)`.
pub fn derive_seed(seed: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn derived_stream(seed: u64, parts: &[&str]) -> Stream {
    stream(derive_seed(seed, parts))
}
