//! Master-seed fan-out.
//!
//! Every stochastic stage of an experiment draws from its own child seed,
//! derived as the first eight bytes (little-endian) of
//! `SHA-256(master_le || stage_name || index_le)`. Any stage can therefore be
//! replayed on its own from the master seed, its name and its index.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives the child seed for `(master, stage, index)`.
pub fn derive_seed(master: u64, stage: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(stage.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// The RNG used throughout the crate. ChaCha8 output is stable across
/// platforms and crate versions, which the reproducibility guarantees rely on.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Hex SHA-256 of arbitrary bytes, used for config and manifest hashes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
