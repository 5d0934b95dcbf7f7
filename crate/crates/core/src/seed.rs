//! Deterministic fan-out of one master seed into per-stage seeds.
//!
//! Every random stage in the pipeline (balancing, splitting, weight init,
//! per-round local training, ...) gets its own seed derived from the master
//! seed plus a list of stage tags. The derivation is a pure integer hash, so
//! runs are reproducible bit-for-bit across platforms.

/// Stage tags used across the workspace. Kept in one place so the manifest
/// can re-derive and record the exact seed every stage consumed.
pub mod stage {
    pub const BALANCE: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const LOCAL_TRAIN: u64 = 3;
    pub const SYNTH_DATA: u64 = 4;
    pub const FIXTURE: u64 = 5;
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// splitmix64 finalizer; full-period mixing of a 64-bit word.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a stage seed from `master` and an ordered list of tags.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut acc = mix(master.wrapping_add(GOLDEN_GAMMA));
    for &tag in tags {
        acc = mix(acc ^ tag.wrapping_add(GOLDEN_GAMMA));
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_deterministic() {
        assert_eq!(derive_seed(42, &[1, 2, 3]), derive_seed(42, &[1, 2, 3]));
    }

    #[test]
    fn different_tags_give_different_seeds() {
        let base = derive_seed(42, &[stage::BALANCE, 0]);
        assert_ne!(base, derive_seed(42, &[stage::BALANCE, 1]));
        assert_ne!(base, derive_seed(42, &[stage::SPLIT, 0]));
        assert_ne!(base, derive_seed(43, &[stage::BALANCE, 0]));
    }

    #[test]
    fn tag_order_matters() {
        assert_ne!(derive_seed(7, &[1, 2]), derive_seed(7, &[2, 1]));
    }

    #[test]
    fn no_collisions_over_a_small_grid() {
        let mut seen = std::collections::HashSet::new();
        for master in 0..8u64 {
            for a in 0..16u64 {
                for b in 0..16u64 {
                    assert!(seen.insert(derive_seed(master, &[a, b])));
                }
            }
        }
    }
}
