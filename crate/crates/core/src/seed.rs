//! Hierarchical seeds.
//!
//! A run seed fans out into named sub-streams (split, detection, augmentation,
//! init, negatives, ...). Each sub-seed is a SplitMix64 mix of the parent seed
//! and an FNV-1a hash of the label, so changing the parent changes every
//! child and sibling streams never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Derive a child seed for `label` from `seed`.
pub fn derive(seed: u64, label: &str) -> u64 {
    splitmix64(seed ^ splitmix64(fnv1a(label)))
}

/// Derive a child seed indexed by an integer (epochs, trials, batches).
pub fn derive_indexed(seed: u64, label: &str, index: u64) -> u64 {
    splitmix64(derive(seed, label) ^ splitmix64(index.wrapping_add(1)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Named sub-seeds of a single experiment run, kept together for logging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct SeedLineage {
    pub run: u64,
    pub split: u64,
    pub detection: u64,
    pub augmentation: u64,
    pub init: u64,
    pub negatives: u64,
    pub decoder: u64,
    pub evaluation: u64,
}

impl SeedLineage {
    pub fn new(run: u64) -> Self {
        Self {
            run,
            split: derive(run, "split"),
            detection: derive(run, "detection"),
            augmentation: derive(run, "augmentation"),
            init: derive(run, "init"),
            negatives: derive(run, "negatives"),
            decoder: derive(run, "decoder"),
            evaluation: derive(run, "evaluation"),
        }
    }
}
