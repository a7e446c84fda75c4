//! Deterministic seeding: every stochastic component derives its generator
//! from a label, the run seed, and optional context bytes, so component
//! order can never change the draw sequence.

use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn seeded(label: &str, seed: u64, context: &[u8]) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(label.as_bytes());
    hasher.update(seed.to_le_bytes());
    hasher.update(context);
    rand::SeedableRng::from_seed(hasher.finalize().into())
}
