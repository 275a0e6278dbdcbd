//! Deterministic seed derivation.
//!
//! Every random stream in a simulation is keyed by a 64-bit seed derived
//! from the master seed with the SplitMix64 finalizer, so any frame of any
//! sweep point can be regenerated on its own.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `mix(mix(mix(master) ^ a) ^ b)`
pub fn derive(master: u64, a: u64, b: u64) -> u64 {
    mix64(mix64(mix64(master) ^ a) ^ b)
}

/// Independent sub-streams of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Bits = 1,
    Filler = 2,
    Channel = 3,
    Noise = 4,
    Snr = 5,
}

pub fn stream_seed(frame_seed: u64, stream: Stream) -> u64 {
    derive(frame_seed, 0x5354_5245_414d, stream as u64)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
