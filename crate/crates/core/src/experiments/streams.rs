//! Synthetic stream families with known distinct counts and overlaps.

use std::borrow::Cow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hash::{hash_identifier, HashSeed, UnitHash};
use crate::sketch::Predicate;

/// Which identifiers each stream holds.
#[derive(Clone, Debug, PartialEq)]
pub enum Layout {
    /// Stream `j` holds its own block of `sizes[j]` identifiers.
    DisjointRanges { sizes: Vec<usize> },
    /// All streams share the first `shared` identifiers; stream `j` adds
    /// `sizes[j] - shared` private ones.
    Overlapping { sizes: Vec<usize>, shared: usize },
    /// `copies` streams over the same `base_size` identifiers.
    Permutations { base_size: usize, copies: usize },
}

/// Arrival order within each stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamOrder {
    /// Ascending identifier number.
    Sorted,
    /// A fresh permutation per trial, derived from the trial seed.
    Shuffled,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StreamSpec {
    pub layout: Layout,
    pub order: StreamOrder,
}

impl StreamSpec {
    pub fn single(n: usize) -> Self {
        Self::disjoint(vec![n])
    }

    pub fn disjoint(sizes: Vec<usize>) -> Self {
        StreamSpec {
            layout: Layout::DisjointRanges { sizes },
            order: StreamOrder::Sorted,
        }
    }

    pub fn overlapping(sizes: Vec<usize>, shared: usize) -> Self {
        StreamSpec {
            layout: Layout::Overlapping { sizes, shared },
            order: StreamOrder::Sorted,
        }
    }

    pub fn permutations(base_size: usize, copies: usize) -> Self {
        StreamSpec {
            layout: Layout::Permutations { base_size, copies },
            order: StreamOrder::Shuffled,
        }
    }

    pub fn with_order(mut self, order: StreamOrder) -> Self {
        self.order = order;
        self
    }

    /// Short label used in CSV output.
    pub fn layout_name(&self) -> &'static str {
        match self.layout {
            Layout::DisjointRanges { .. } => "disjoint",
            Layout::Overlapping { .. } => "overlapping",
            Layout::Permutations { .. } => "permutations",
        }
    }

    pub fn stream_count(&self) -> usize {
        match &self.layout {
            Layout::DisjointRanges { sizes } | Layout::Overlapping { sizes, .. } => sizes.len(),
            Layout::Permutations { copies, .. } => *copies,
        }
    }

    /// Lay out identifier numbers. Identifier `i` is the decimal string of `i`.
    pub fn materialize(&self) -> Result<Workload> {
        let invalid = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        let streams: Vec<Vec<u32>> = match &self.layout {
            Layout::DisjointRanges { sizes } => {
                if sizes.is_empty() {
                    return invalid("layout needs at least one stream");
                }
                let mut next = 0u32;
                sizes
                    .iter()
                    .map(|&s| {
                        let block = (next..next + s as u32).collect();
                        next += s as u32;
                        block
                    })
                    .collect()
            }
            Layout::Overlapping { sizes, shared } => {
                if sizes.is_empty() {
                    return invalid("layout needs at least one stream");
                }
                if sizes.iter().any(|s| s < shared) {
                    return invalid("shared block is larger than a stream");
                }
                let shared = *shared as u32;
                let mut next = shared;
                sizes
                    .iter()
                    .map(|&s| {
                        let private = s as u32 - shared;
                        let stream = (0..shared).chain(next..next + private).collect();
                        next += private;
                        stream
                    })
                    .collect()
            }
            Layout::Permutations { base_size, copies } => {
                if *copies == 0 {
                    return invalid("layout needs at least one stream");
                }
                vec![(0..*base_size as u32).collect(); *copies]
            }
        };
        let universe = streams.iter().flatten().max().map_or(0, |&m| m as usize + 1);
        Ok(Workload {
            ids: (0..universe).map(|i| i.to_string().into_bytes()).collect(),
            streams,
            order: self.order,
        })
    }
}

const ORDER_SALT: u64 = 0x005E_ED0F_0DE5;

/// Materialized streams: every identifier of the union once, plus each
/// stream as a list of indices into it.
#[derive(Clone, Debug)]
pub struct Workload {
    ids: Vec<Vec<u8>>,
    streams: Vec<Vec<u32>>,
    order: StreamOrder,
}

impl Workload {
    /// Distinct identifiers across all streams.
    pub fn ids(&self) -> &[Vec<u8>] {
        &self.ids
    }

    /// Streams in sorted order, as indices into [`Workload::ids`].
    pub fn streams(&self) -> &[Vec<u32>] {
        &self.streams
    }

    /// Distinct identifiers of the union satisfying `predicate`.
    pub fn union_count(&self, predicate: &Predicate) -> usize {
        self.ids.iter().filter(|id| predicate.matches(id)).count()
    }

    pub(crate) fn hashes(&self, seed: HashSeed) -> Vec<UnitHash> {
        self.ids.iter().map(|id| hash_identifier(id, seed)).collect()
    }

    /// Per-trial arrival orders. Shuffles depend only on `seed`.
    pub(crate) fn orders(&self, seed: HashSeed) -> Vec<Cow<'_, [u32]>> {
        match self.order {
            StreamOrder::Sorted => self.streams.iter().map(|s| Cow::Borrowed(&s[..])).collect(),
            StreamOrder::Shuffled => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.get() ^ ORDER_SALT);
                self.streams
                    .iter()
                    .map(|s| {
                        let mut s = s.clone();
                        s.shuffle(&mut rng);
                        Cow::Owned(s)
                    })
                    .collect()
            }
        }
    }
}
