//! Deterministic seed derivation for the experiment tree.
//!
//! Every random consumer in a sweep gets its own stream, derived from the
//! master seed and a label path (condition, cell, release, network,
//! simulation, scenario). Hashing keeps distinct paths statistically
//! independent and makes results reproducible under any task scheduling.

use sha2::{Digest, Sha256};

/// Derives a 64-bit seed from the master seed and an ordered label path.
/// Components are length-prefixed before hashing, so `["ab", "c"]` and
/// `["a", "bc"]` derive different seeds.
pub fn derive_seed<S: AsRef<str>>(master_seed: u64, path: &[S]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    for part in path {
        let bytes = part.as_ref().as_bytes();
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(bytes);
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest is 32 bytes"))
}

/// Joins a path for storage in release metadata or logs.
pub fn path_label<S: AsRef<str>>(path: &[S]) -> String {
    path.iter().map(|p| p.as_ref()).collect::<Vec<_>>().join("/")
}
