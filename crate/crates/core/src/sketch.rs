//! The `(theta, S)` sketch and its estimators.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hash::{hash_identifier, HashSeed, UnitHash};

/// Which threshold rule produced a sketch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TcfKind {
    Kmv,
    Adaptive,
    Pkmv,
    Fixed,
    Alpha,
    Union,
    Intersect,
    Difference,
    /// The deliberately biased rule kept as a counterexample.
    Biased,
}

impl TcfKind {
    pub const fn name(self) -> &'static str {
        match self {
            TcfKind::Kmv => "kmv",
            TcfKind::Adaptive => "adaptive",
            TcfKind::Pkmv => "pkmv",
            TcfKind::Fixed => "fixed",
            TcfKind::Alpha => "alpha",
            TcfKind::Union => "union",
            TcfKind::Intersect => "intersect",
            TcfKind::Difference => "diff",
            TcfKind::Biased => "biased",
        }
    }
}

impl fmt::Display for TcfKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TcfKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "kmv" => TcfKind::Kmv,
            "adaptive" => TcfKind::Adaptive,
            "pkmv" => TcfKind::Pkmv,
            "fixed" => TcfKind::Fixed,
            "alpha" => TcfKind::Alpha,
            "union" => TcfKind::Union,
            "intersect" => TcfKind::Intersect,
            "diff" => TcfKind::Difference,
            "biased" => TcfKind::Biased,
            other => return Err(format!("unknown tcf kind `{other}`")),
        })
    }
}

/// A retained hash, optionally with the identifier it came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub hash: UnitHash,
    pub id: Option<Box<[u8]>>,
}

impl Entry {
    pub fn new(hash: UnitHash, id: Option<Box<[u8]>>) -> Self {
        Entry { hash, id }
    }

    pub fn hash_only(hash: UnitHash) -> Self {
        Entry { hash, id: None }
    }
}

/// A theta sketch: threshold `theta` and every distinct observed hash below it.
///
/// Entries are kept sorted by raw hash. A sketch with `theta == 1` is in exact
/// mode and counts its stream exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaSketch {
    kind: TcfKind,
    k: usize,
    seed: HashSeed,
    theta: f64,
    retains_ids: bool,
    entries: Vec<Entry>,
}

impl ThetaSketch {
    /// Builds a sketch and checks every invariant.
    pub fn new(
        kind: TcfKind,
        k: usize,
        seed: HashSeed,
        theta: f64,
        retains_ids: bool,
        entries: Vec<Entry>,
    ) -> Result<Self> {
        let sk = Self::from_parts_unchecked(kind, k, seed, theta, retains_ids, entries);
        let violations = sk.validate();
        if violations.is_empty() {
            Ok(sk)
        } else {
            Err(Error::Invariant(violations))
        }
    }

    /// Builds a sketch without validation. Entries are sorted by raw hash but
    /// otherwise taken as given; use [`ThetaSketch::validate`] to inspect them.
    pub fn from_parts_unchecked(
        kind: TcfKind,
        k: usize,
        seed: HashSeed,
        theta: f64,
        retains_ids: bool,
        mut entries: Vec<Entry>,
    ) -> Self {
        entries.sort_by_key(|e| e.hash);
        ThetaSketch {
            kind,
            k,
            seed,
            theta,
            retains_ids,
            entries,
        }
    }

    pub fn kind(&self) -> TcfKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> HashSeed {
        self.seed
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn retains_ids(&self) -> bool {
        self.retains_ids
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_exact(&self) -> bool {
        self.theta == 1.0
    }

    pub fn contains(&self, hash: UnitHash) -> bool {
        self.entries.binary_search_by_key(&hash, |e| e.hash).is_ok()
    }

    /// `|S| / theta`.
    pub fn estimate(&self) -> f64 {
        self.entries.len() as f64 / self.theta
    }

    /// `|P(S)| / theta`: the estimated number of distinct identifiers in the
    /// stream that satisfy `predicate`.
    pub fn estimate_subpopulation(&self, predicate: &Predicate) -> Result<f64> {
        if predicate.is_all() {
            return Ok(self.estimate());
        }
        if !self.retains_ids {
            return Err(Error::IdsUnavailable);
        }
        let matching = self
            .entries
            .iter()
            .filter(|e| e.id.as_deref().is_some_and(|id| predicate.matches(id)))
            .count();
        Ok(matching as f64 / self.theta)
    }

    /// Every broken invariant; empty for a well-formed sketch.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            out.push(Violation::ThetaOutOfRange(self.theta));
        }
        if self.k == 0 {
            out.push(Violation::ZeroK);
        }
        for (idx, e) in self.entries.iter().enumerate() {
            if e.hash.value() >= self.theta {
                out.push(Violation::EntryNotBelowTheta {
                    raw: e.hash.raw(),
                    theta: self.theta,
                });
            }
            if idx > 0 && self.entries[idx - 1].hash == e.hash {
                out.push(Violation::DuplicateHash { raw: e.hash.raw() });
            }
            match (&e.id, self.retains_ids) {
                (None, true) => out.push(Violation::MissingId { raw: e.hash.raw() }),
                (Some(_), false) => out.push(Violation::UnexpectedId { raw: e.hash.raw() }),
                (Some(id), true) if hash_identifier(id, self.seed) != e.hash => {
                    out.push(Violation::IdHashMismatch { raw: e.hash.raw() })
                }
                _ => {}
            }
        }
        out
    }

    /// Same threshold and same hash set, ignoring metadata and identifiers.
    pub fn same_sample(&self, other: &ThetaSketch) -> bool {
        self.theta.to_bits() == other.theta.to_bits()
            && self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.hash == b.hash)
    }
}

/// One broken [`ThetaSketch`] invariant.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    ThetaOutOfRange(f64),
    ZeroK,
    EntryNotBelowTheta { raw: u64, theta: f64 },
    DuplicateHash { raw: u64 },
    MissingId { raw: u64 },
    UnexpectedId { raw: u64 },
    IdHashMismatch { raw: u64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ThetaOutOfRange(t) => write!(f, "theta {t} outside (0, 1]"),
            Violation::ZeroK => f.write_str("k must be positive"),
            Violation::EntryNotBelowTheta { raw, theta } => {
                write!(f, "entry {raw:016x} is not below theta {theta}")
            }
            Violation::DuplicateHash { raw } => write!(f, "entry {raw:016x} appears twice"),
            Violation::MissingId { raw } => write!(f, "entry {raw:016x} has no identifier"),
            Violation::UnexpectedId { raw } => {
                write!(f, "entry {raw:016x} carries an identifier in an id-less sketch")
            }
            Violation::IdHashMismatch { raw } => {
                write!(f, "identifier of entry {raw:016x} does not hash to it")
            }
        }
    }
}

/// A property of identifiers selecting a subpopulation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Predicate {
    All,
    MemberSet(HashSet<Vec<u8>>),
    Prefix(Vec<u8>),
}

impl Predicate {
    pub fn member_set<I, B>(ids: I) -> Self
    where
        I: IntoIterator<Item = B>,
        B: AsRef<[u8]>,
    {
        Predicate::MemberSet(ids.into_iter().map(|b| b.as_ref().to_vec()).collect())
    }

    pub fn prefix(prefix: impl AsRef<[u8]>) -> Self {
        Predicate::Prefix(prefix.as_ref().to_vec())
    }

    pub fn is_all(&self) -> bool {
        matches!(self, Predicate::All)
    }

    pub fn matches(&self, id: &[u8]) -> bool {
        match self {
            Predicate::All => true,
            Predicate::MemberSet(set) => set.contains(id),
            Predicate::Prefix(p) => id.starts_with(p),
        }
    }
}
