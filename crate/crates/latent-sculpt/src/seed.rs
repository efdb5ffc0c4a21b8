//! Deterministic seed derivation. Every run hands out one root seed;
//! each randomness consumer (data generation, weight init, batch
//! shuffling, prior draws, metric splits) gets its own stream derived
//! here, so adding a consumer never perturbs the others.

/// Stream tags, one per randomness consumer.
pub mod streams {
    pub const DATA: u64 = 0;
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const PRIOR: u64 = 3;
    pub const LPS_SPLIT: u64 = 4;
}

/// splitmix64 finalizer; full-period bijective mixer.
fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed for `stream` from the root seed.
pub fn derive(root: u64, stream: u64) -> u64 {
    mix(root ^ mix(stream))
}
