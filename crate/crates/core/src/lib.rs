//! Contextual-integrity survey toolkit: flow generation, questionnaire
//! assembly, response ingestion and paired nonparametric analysis.

pub mod analysis;
pub mod demographics;
pub mod flowspace;
pub mod likert;
pub mod questionnaire;
pub mod responses;
pub mod simulate;
pub mod stats;

use sha2::{Digest, Sha256};

/// Stable 64-bit seed from labelled parts (length-prefixed, SHA-256).
pub fn derive_seed(parts: &[&[u8]]) -> u64 {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}
