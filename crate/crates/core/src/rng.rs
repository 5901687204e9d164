//! Seeded random streams. Each (seed, iteration, purpose) triple gets its
//! own ChaCha stream so that runs differing only in mechanism or epsilon
//! share their random draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Data = 1,
    OwnerNoise = 2,
    OwnerSensitivity = 3,
    AnalystSensitivity = 4,
    Misc = 5,
}

pub fn stream(seed: u64, iteration: u64, purpose: Purpose) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((iteration << 8) | purpose as u64);
    rng
}

pub fn seeded(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}
