//! Seeded generators. Every stochastic component draws from a ChaCha8
//! stream keyed by `(seed, stream)` so parallel work stays reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Well-known stream ids so unrelated components never share a stream.
pub mod streams {
    pub const SPLIT: u64 = 1;
    pub const PRETRAIN: u64 = 2;
    pub const EPISODE_BASE: u64 = 1 << 32;
    pub const REGRET_BASE: u64 = 1 << 40;
    pub const ENV: u64 = 3;
    pub const SURROGATE: u64 = 4;
    pub const PRETRAIN_MONITOR: u64 = 5;
    pub const PRETRAIN_INIT: u64 = 6;
}
