//! Seed derivation for independent work units.

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of unit `(major, minor)` under `base`. Each unit depends only on its
/// own coordinates, so reseeding one unit leaves every other unit unchanged.
pub fn derive_seed(base: u64, major: u64, minor: u64) -> u64 {
    splitmix64(base ^ splitmix64(major.wrapping_mul(0x1_0000_0001) ^ splitmix64(minor)))
}
