//! Seeded random streams.
//!
//! Every stochastic component draws from its own ChaCha8 stream derived from
//! the experiment seed, so adding draws in one component never shifts the
//! sequence seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream identifiers used across the crate.
pub mod stream {
    pub const INIT: u64 = 1;
    pub const FIXED_POINTS: u64 = 2;
    pub const EPOCH: u64 = 3;
    pub const NOISE: u64 = 4;
    pub const DIAGNOSTICS: u64 = 5;
    pub const SAMPLER: u64 = 6;
}

pub fn seeded(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream for a sub-task (e.g. one constraint in one epoch) of a base stream.
pub fn substream(seed: u64, stream: u64, a: u64, b: u64) -> Rng {
    let mixed = seed
        ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F).rotate_left(17);
    seeded(mixed, stream)
}
