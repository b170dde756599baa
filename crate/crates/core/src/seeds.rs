//! Named seed derivation so every stage draws from its own reproducible stream.

use sha2::{Digest, Sha256};

/// Derives a 64-bit seed from a master seed, a stage name and an index.
pub fn derive_seed(master: u64, stage: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((stage.len() as u64).to_le_bytes());
    h.update(stage.as_bytes());
    h.update(index.to_le_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("digest has at least 8 bytes"))
}
