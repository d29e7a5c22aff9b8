//! Seed derivation and named random streams.
//!
//! Every source of randomness in an experiment draws from its own ChaCha
//! stream whose seed is derived from the master seed by a fixed, documented
//! hash. This keeps trials independent of each other (adding trials never
//! perturbs earlier ones) and keeps logically separate draws (mixing coin,
//! random selection, data generation, pool splitting) from interfering, so
//! degenerate configurations (e.g. mix probability 0 or 1) reproduce their
//! pure counterparts bit-exactly.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags; second argument to [`derive_seed`].
pub mod stream {
    /// Dataset generation / source selection.
    pub const DATA: u64 = 1;
    /// Per-trial labeled/validation split.
    pub const SPLIT: u64 = 2;
    /// Mixed-strategy coin.
    pub const MIX: u64 = 3;
    /// Random-selection draws.
    pub const RANDOM_SELECT: u64 = 4;
}

/// SplitMix64 finalizer (Steele, Lea & Flood); bijective on `u64`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed: `splitmix64(splitmix64(base) ^ tag)`.
///
/// For a fixed `base`, distinct tags give distinct seeds (splitmix64 is a
/// bijection). The formula is part of the reproducibility contract and must
/// not change.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(base) ^ tag)
}

/// Seed for trial number `trial_index` (0-based) under a master seed.
pub fn derive_trial_seed(master_seed: u64, trial_index: usize) -> u64 {
    // Offset keeps trial tags clear of the small stream constants.
    derive_seed(master_seed, 0x1000 + trial_index as u64)
}

/// A dedicated random stream for (`base`, `tag`).
pub fn stream_rng(base: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, tag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn splitmix64_reference_values() {
        // Frozen: changing these silently breaks every recorded experiment.
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(1), 0x910A_2DEC_8902_5CC1);
        assert_eq!(splitmix64(0x9E37_79B9_7F4A_7C15), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        let a = derive_trial_seed(42, 0);
        let b = derive_trial_seed(42, 1);
        assert_ne!(a, b);
        assert_eq!(a, derive_trial_seed(42, 0));

        let tags = [
            stream::DATA,
            stream::SPLIT,
            stream::MIX,
            stream::RANDOM_SELECT,
        ];
        for (i, &t) in tags.iter().enumerate() {
            for &u in &tags[i + 1..] {
                assert_ne!(derive_seed(a, t), derive_seed(a, u));
            }
        }
    }

    #[test]
    fn streams_reproduce_bit_exactly() {
        let mut r1 = stream_rng(7, stream::MIX);
        let mut r2 = stream_rng(7, stream::MIX);
        for _ in 0..16 {
            assert_eq!(r1.next_u64(), r2.next_u64());
        }
    }
}
