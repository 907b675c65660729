//! Stable seed derivation.
//!
//! Per-subgroup and per-trial generators are seeded from a mix of the
//! configured base seed and a stable identity (the subgroup label, an
//! experiment name, a trial index) — never from row order, thread id, or
//! call order. The mixing functions are fixed here byte-for-byte: changing
//! them changes every reported Monte-Carlo result, so the unit tests pin
//! exact output values.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over the label bytes; stable, allocation-free, endian-independent.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// SplitMix64 finalizer: a full-avalanche bijection on u64.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed for the task identified by `label` under `base`.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    mix(base ^ fnv1a(label.as_bytes()))
}

/// Derives the seed for the `index`-th task in the stream named `label`.
pub fn derive_indexed_seed(base: u64, label: &str, index: u64) -> u64 {
    mix(derive_seed(base, label) ^ mix(index))
}

/// The deterministic generator used for every Monte-Carlo draw in this crate.
///
/// ChaCha with a fixed round count has a portable, documented stream for a
/// given seed, so results are identical across platforms and releases.
pub type Rng = ChaCha8Rng;

/// Builds the generator for a derived seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::RngCore;

    // These values pin the derivation scheme. If a refactor changes them,
    // every seeded result in every report changes too — that must be a
    // deliberate, visible decision, not an accident.
    #[test]
    fn derivation_is_pinned() {
        assert_eq!(derive_seed(0, "sex=F"), 0xe310_e8ba_2bab_e548);
        assert_eq!(derive_seed(7, "a"), 0xfd87_7fe2_b107_ef12);
        assert_ne!(derive_seed(0, "sex=F"), derive_seed(0, "sex=M"));
        assert_ne!(derive_seed(0, "sex=F"), derive_seed(1, "sex=F"));
    }

    #[test]
    fn indexed_streams_are_distinct_and_pinned() {
        let a = derive_indexed_seed(42, "trial", 0);
        let b = derive_indexed_seed(42, "trial", 1);
        assert_eq!(a, 0x4248_70db_f1a7_190b);
        assert_ne!(a, b);
        assert_eq!(a, derive_indexed_seed(42, "trial", 0));
    }

    #[test]
    fn generator_stream_is_pinned() {
        // ChaCha8 with seed_from_u64(0): first words of the keystream must
        // never change between releases of this crate.
        let mut rng = rng_from_seed(0);
        let first = rng.next_u64();
        let second = rng.next_u64();
        let mut again = rng_from_seed(0);
        assert_eq!(again.next_u64(), first);
        assert_eq!(again.next_u64(), second);
    }
}
