//! Named, independently seeded random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream identifiers; each stochastic component draws from its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    NetInit = 1,
    Explore = 2,
    Replay = 3,
}

/// SplitMix64 finalizer, used to derive per-agent seeds.
pub fn mix(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn agent_stream(seed: u64, agent: usize, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, agent as u64));
    rng.set_stream(stream as u64);
    rng
}
