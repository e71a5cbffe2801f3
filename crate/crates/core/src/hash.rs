//! Seeded hashing of identifiers into the open unit interval.
//!
//! Every sketch is built against one concrete hash function, selected by a
//! [`HashSeed`]. Identifiers are mixed with xxh3 into a 64-bit raw value;
//! the raw value is then mapped to a binary64 fraction strictly inside
//! `(0, 1)`.
//!
//! The real-valued form keeps the top 52 bits of the raw hash and centres
//! the value in its cell: `value = (floor(raw / 2^12) + 1/2) * 2^-52`. Every
//! such value is exactly representable, the smallest is `2^-53` and the
//! largest `1 - 2^-53`, so neither endpoint is reachable. Ordering by raw
//! implies the same (non-strict) ordering by value; two raws can only share a
//! value if they agree on their top 52 bits.

use std::cmp::Ordering;
use std::fmt;

use xxhash_rust::xxh3::xxh3_64_with_seed;

const VALUE_SHIFT: u32 = 12;
const VALUE_SCALE: f64 = 1.0 / (1u64 << 52) as f64;
const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// Selects one concrete hash function.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HashSeed(pub u64);

impl HashSeed {
    pub const fn new(seed: u64) -> Self {
        HashSeed(seed)
    }

    pub const fn get(self) -> u64 {
        self.0
    }

    /// Seed for the `trial_index`-th independent repetition of an experiment.
    ///
    /// The index is spread with the golden-ratio increment and passed through
    /// the SplitMix64 finalizer, a bijection on `u64`, so distinct indices give
    /// distinct seeds for a fixed base.
    pub fn derive_trial_seed(self, trial_index: u64) -> HashSeed {
        let spread = self
            .0
            .wrapping_add(GOLDEN_GAMMA.wrapping_mul(trial_index.wrapping_add(1)));
        HashSeed(splitmix64(spread))
    }
}

impl fmt::Display for HashSeed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// SplitMix64 output function.
pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A hashed identifier: the raw 64-bit hash and its unit-interval value.
///
/// Equality and ordering are on `raw`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UnitHash {
    raw: u64,
}

impl UnitHash {
    pub const fn from_raw(raw: u64) -> Self {
        UnitHash { raw }
    }

    pub const fn raw(self) -> u64 {
        self.raw
    }

    /// The hash as a fraction in the open interval `(0, 1)`.
    #[inline]
    pub fn value(self) -> f64 {
        ((self.raw >> VALUE_SHIFT) as f64 + 0.5) * VALUE_SCALE
    }
}

impl fmt::Debug for UnitHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UnitHash({:016x} ~ {})", self.raw, self.value())
    }
}

/// Hash an identifier under `seed`.
#[inline]
pub fn hash_identifier(id: &[u8], seed: HashSeed) -> UnitHash {
    UnitHash::from_raw(xxh3_64_with_seed(id, seed.0))
}

/// A point of the unit interval that threshold functions can order,
/// deduplicate and compare against a threshold.
///
/// Implemented for [`UnitHash`] (real streams) and for `f64` (hand-built
/// instances and the goodness grids, where the hash values are chosen
/// directly).
pub trait HashPoint: Copy {
    /// Key whose integer order agrees with the order of [`Self::unit_value`];
    /// equal keys denote the same hash.
    fn order_key(self) -> u64;

    fn unit_value(self) -> f64;
}

impl HashPoint for UnitHash {
    #[inline]
    fn order_key(self) -> u64 {
        self.raw
    }

    #[inline]
    fn unit_value(self) -> f64 {
        self.value()
    }
}

impl HashPoint for f64 {
    /// Bit pattern of a positive float; monotone in the value.
    #[inline]
    fn order_key(self) -> u64 {
        debug_assert!(self > 0.0 && self < 1.0, "hash value {self} outside (0,1)");
        self.to_bits()
    }

    #[inline]
    fn unit_value(self) -> f64 {
        self
    }
}

pub(crate) fn cmp_points<H: HashPoint>(a: &H, b: &H) -> Ordering {
    a.order_key().cmp(&b.order_key())
}
