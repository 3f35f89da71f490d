//! Per-trial seed derivation.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function, a bijection on `u64`.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `index` under `master_seed`.
///
/// `mix(mix(master) + GOLDEN * (index + 1))` where `mix` is the SplitMix64
/// finaliser. For a fixed master seed the map from index to seed is a
/// bijection, so distinct trials never share a seed. This function is part of
/// the output format: changing it changes every published number.
pub fn trial_seed(master_seed: u64, index: u64) -> u64 {
    mix(mix(master_seed).wrapping_add(GOLDEN.wrapping_mul(index.wrapping_add(1))))
}

/// Independent sub-streams of one trial (channel, bits, noise, ...).
pub fn stream_seed(trial: u64, stream: u64) -> u64 {
    trial_seed(trial ^ 0x5bd1_e995_0000_0000, stream)
}
