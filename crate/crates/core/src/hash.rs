//! Seedless 64-bit mixing used for fingerprints and derived seeds.
//!
//! `mix64` is the SplitMix64 finalizer; `combine` folds a value into a running
//! hash. Both are fixed so outputs are bit-identical across runs and platforms.

pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn combine(seed: u64, value: u64) -> u64 {
    mix64(seed ^ value.wrapping_mul(0x9e37_79b9_7f4a_7c15).rotate_left(17))
}

/// Derives an independent stream seed, e.g. per tree or per candidate.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    combine(mix64(seed), stream)
}
