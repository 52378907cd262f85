//! Seed derivation for nested deterministic sampling.
//!
//! Experiments fan out over (knob, seed) grids, possibly in parallel; each
//! task derives its own ChaCha stream from the master seed and its grid
//! coordinates so results are independent of scheduling order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 step — the standard 64-bit finalizer used to decorrelate
/// structured seed inputs.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a master seed with up to two grid coordinates into a fresh seed.
pub fn derive_seed(master: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(a)) ^ splitmix64(b.wrapping_add(0x51ed_270b)))
}

/// ChaCha8 stream for a derived seed.
pub fn rng_for(master: u64, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_are_distinct_across_the_grid() {
        let mut seen = std::collections::HashSet::new();
        for a in 0..50u64 {
            for b in 0..50u64 {
                assert!(seen.insert(derive_seed(7, a, b)), "collision at ({a},{b})");
            }
        }
    }

    #[test]
    fn derivation_is_pure() {
        assert_eq!(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
        assert_ne!(derive_seed(1, 2, 3), derive_seed(2, 2, 3));
    }
}
