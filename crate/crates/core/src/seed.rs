//! Seed derivation for reproducible random streams.
//!
//! Every stochastic quantity is drawn from a ChaCha8 stream whose 64-bit seed
//! is derived from `(root, replicate, index)` by chained SplitMix64 finalisers:
//!
//! ```text
//! h = mix(root + γ)
//! h = mix(h + (replicate + 1)·γ)
//! h = mix(h + (index + 1)·γ)
//! ```
//!
//! with wrapping arithmetic, `γ = 0x9e3779b97f4a7c15` and
//! `mix(z) = z ⊕ (z ≫ 31)` after `z ← (z ⊕ (z ≫ 30))·0xbf58476d1ce4e5b9`,
//! `z ← (z ⊕ (z ≫ 27))·0x94d049bb133111eb`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the stream for draw `index` of replicate `replicate`.
pub fn derive_seed(root: u64, replicate: u64, index: u64) -> u64 {
    let mut h = mix64(root.wrapping_add(GOLDEN_GAMMA));
    h = mix64(h.wrapping_add(replicate.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)));
    mix64(h.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `stream(derive_seed(root, replicate, index))`.
pub fn derived_stream(root: u64, replicate: u64, index: u64) -> ChaCha8Rng {
    stream(derive_seed(root, replicate, index))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // First outputs of SplitMix64 seeded with 0 (state advanced by γ before mixing).
        assert_eq!(mix64(GOLDEN_GAMMA), 0xe220_a839_7b1d_cdaf);
        assert_eq!(mix64(GOLDEN_GAMMA.wrapping_mul(2)), 0x6e78_9e6a_a1b9_65f4);
    }

    #[test]
    fn derived_seed_reference_values() {
        // Computed independently; other implementations must reproduce these.
        assert_eq!(derive_seed(0, 0, 0), 0x2382_75bc_38fc_be91);
        assert_eq!(derive_seed(42, 3, 7), 0x1db2_3cb3_5988_6f1c);
        assert_eq!(derive_seed(1, u64::MAX, 0), 0x6ec8_5f1f_8547_bc0c);
    }

    #[test]
    fn derivation_separates_coordinates() {
        let a = derive_seed(1, 0, 0);
        assert_ne!(a, derive_seed(1, 0, 1));
        assert_ne!(a, derive_seed(1, 1, 0));
        assert_ne!(a, derive_seed(2, 0, 0));
        assert_ne!(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
        assert_eq!(a, derive_seed(1, 0, 0));
    }
}
