//! Per-cycle random streams.
//!
//! Every simulated cycle gets its own ChaCha8 stream keyed by
//! `(seed, domain)` and selected by the cycle index, so the random numbers a
//! cycle sees never depend on which worker ran it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RandomStream = ChaCha8Rng;

/// Stream domains. Distinct phases of an experiment draw from disjoint keys.
pub mod domain {
    pub const DENOMINATOR: u64 = 1;
    pub const PRODUCTION: u64 = 2;
    pub const VALIDATION: u64 = 3;
    pub const PILOT_NAIVE: u64 = 4;
    pub const PILOT_IS: u64 = 5;
    pub const PROFILE: u64 = 6;
    pub const VALIDATION_DENOMINATOR: u64 = 7;
    pub const NAIVE: u64 = 8;
    /// CE iteration `t` uses `CE_BASE + t`.
    pub const CE_BASE: u64 = 1 << 20;
    /// Heuristic pilot after CE iteration `t` uses `HEURISTIC_BASE + t`.
    pub const HEURISTIC_BASE: u64 = 1 << 21;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a tag into a seed; used for replication and per-target sub-seeds.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(tag.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// The stream for cycle `index` in `domain` under `seed`.
pub fn cycle_stream(seed: u64, domain: u64, index: u64) -> RandomStream {
    let mut key = [0u8; 32];
    let mut state = derive_seed(seed, domain);
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
