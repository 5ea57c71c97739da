//! Seed derivation for reproducible parallel Monte Carlo runs.
//!
//! Every source of randomness in the simulator is a [`ChaCha8Rng`] derived
//! from a master seed and a label path, e.g. `derive_rng(seed, &[TRIAL, t])`.
//! Derivation is a SplitMix64 hash chain, so streams are independent of
//! worker scheduling and two runs with the same master seed are bit-identical.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// Label constants for the standard stream paths used by the harness.
pub mod label {
    pub const GEOMETRY: u64 = 0x01;
    pub const SHADOWING: u64 = 0x02;
    pub const CHANNEL: u64 = 0x03;
    pub const PILOT_NOISE: u64 = 0x04;
    pub const OCL_PILOT_SYMBOLS: u64 = 0x05;
    pub const DATA_BITS: u64 = 0x06;
    pub const OCL_DATA_SYMBOLS: u64 = 0x07;
    pub const DATA_NOISE: u64 = 0x08;
    pub const TRIAL: u64 = 0x10;
    pub const SNR_POINT: u64 = 0x11;
    pub const MODE: u64 = 0x12;
    pub const BLOCK: u64 = 0x13;
    pub const CODE: u64 = 0x14;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash a master seed and a label path down to a single stream seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut state = master;
    let mut out = splitmix64(&mut state);
    for &label in path {
        state ^= label.wrapping_mul(0xD6E8_FEB8_6659_FD93);
        out = splitmix64(&mut state);
    }
    out
}

/// Independent RNG stream for the given label path.
pub fn derive_rng(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}
