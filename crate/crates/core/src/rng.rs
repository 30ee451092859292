//! Seed fan-out.
//!
//! Every command takes one `--seed`. Each consumer derives its generator as
//! ChaCha8 seeded with that value and switched to a fixed stream id, so the
//! consumers never share a sequence and adding draws in one never shifts
//! another. Per-item generators (one rollout, one environment class) mix the
//! item index into the seed with [`mix`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream ids, one per randomness consumer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    EnvSampling = 1,
    TaskRollouts = 2,
    Init = 3,
    Batches = 4,
    Triples = 5,
    Dynamics = 6,
    BoCandidates = 7,
    Finetune = 8,
    Evaluation = 9,
}

pub fn stream(seed: u64, which: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// SplitMix64 finalizer over `seed ⊕ index`.
pub fn mix(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
