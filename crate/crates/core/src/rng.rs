//! Keyed random streams.
//!
//! Every stochastic choice in the crate draws from a stream identified by a
//! `(master seed, domain, a, b)` key. The key is written verbatim into a
//! ChaCha8 seed, so distinct keys give independent streams and the order in
//! which streams are consumed never changes any individual draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream type handed to samplers.
pub type Stream = ChaCha8Rng;

/// Stream domains. Keeping them apart guarantees that, for example, the
/// evaluation samples never alias the samples used by the algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Topology = 1,
    Preset = 2,
    Activation = 3,
    Delay = 4,
    Gradient = 5,
    Evaluation = 6,
    BlockChoice = 7,
    OracleNoise = 8,
    DelaySchedule = 9,
    Test = 100,
}

/// Opens the stream for `(seed, domain, a, b)`.
pub fn keyed(seed: u64, domain: Domain, a: u64, b: u64) -> Stream {
    let mut bytes = [0u8; 32];
    bytes[0..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    bytes[16..24].copy_from_slice(&a.to_le_bytes());
    bytes[24..32].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(bytes)
}
