//! Seed plumbing. Every component draws from its own ChaCha stream whose
//! seed is derived from the global run seed and the component name.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

/// `hash(global, name)`, stable across platforms and releases.
pub fn sub_seed(global: u64, name: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(global.to_le_bytes());
    hasher.update(name.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest is 32 bytes"))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn component_rng(global: u64, name: &str) -> Rng {
    rng(sub_seed(global, name))
}
