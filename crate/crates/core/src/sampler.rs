//! Single-pass samplers: one streaming state machine per threshold rule.
//!
//! A [`Sampler`] consumes identifiers one at a time and can be finalized into
//! a [`ThetaSketch`] at any point. Its `(theta, S)` always equals what the
//! matching reference function in [`crate::tcf`] computes from the whole
//! stream followed by keeping the distinct hashes below `theta`.
//!
//! Duplicates are detected by raw hash equality.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::hash::{hash_identifier, HashSeed, UnitHash};
use crate::sketch::{Entry, TcfKind, ThetaSketch};
use crate::tcf::{alpha_for, Tcf};

type StoredId = Option<Box<[u8]>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SamplerKind {
    Kmv,
    Adaptive,
    Pkmv,
    Fixed,
    Alpha,
    /// Counterexample rule; only useful for demonstrating bias.
    Biased,
}

impl SamplerKind {
    pub const ALL_UNBIASED: [SamplerKind; 5] = [
        SamplerKind::Kmv,
        SamplerKind::Adaptive,
        SamplerKind::Pkmv,
        SamplerKind::Fixed,
        SamplerKind::Alpha,
    ];

    pub fn tcf_kind(self) -> TcfKind {
        match self {
            SamplerKind::Kmv => TcfKind::Kmv,
            SamplerKind::Adaptive => TcfKind::Adaptive,
            SamplerKind::Pkmv => TcfKind::Pkmv,
            SamplerKind::Fixed => TcfKind::Fixed,
            SamplerKind::Alpha => TcfKind::Alpha,
            SamplerKind::Biased => TcfKind::Biased,
        }
    }

    pub fn name(self) -> &'static str {
        self.tcf_kind().name()
    }
}

impl std::str::FromStr for SamplerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "kmv" => SamplerKind::Kmv,
            "adaptive" => SamplerKind::Adaptive,
            "pkmv" => SamplerKind::Pkmv,
            "fixed" => SamplerKind::Fixed,
            "alpha" => SamplerKind::Alpha,
            "biased" => SamplerKind::Biased,
            other => return Err(format!("unknown sampler kind `{other}`")),
        })
    }
}

/// Parameters of a sampler.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    /// Target sample size.
    pub k: usize,
    /// Level ratio of adaptive sampling.
    pub beta: f64,
    /// Sampling rate cap of pKMV, and the constant rate of fixed sampling.
    pub p: f64,
    pub seed: HashSeed,
    pub retain_ids: bool,
    /// Let the Alpha sampler drop dedupe-table entries that can no longer be
    /// sampled. Does not change the output.
    pub purge_dedupe: bool,
}

impl SamplerConfig {
    pub fn new(kind: SamplerKind, k: usize, seed: HashSeed) -> Self {
        SamplerConfig {
            kind,
            k,
            beta: 0.5,
            p: 1.0,
            seed,
            retain_ids: false,
            purge_dedupe: false,
        }
    }

    pub fn kmv(k: usize, seed: HashSeed) -> Self {
        Self::new(SamplerKind::Kmv, k, seed)
    }

    pub fn alpha(k: usize, seed: HashSeed) -> Self {
        Self::new(SamplerKind::Alpha, k, seed)
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn with_seed(mut self, seed: HashSeed) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_ids(mut self, retain: bool) -> Self {
        self.retain_ids = retain;
        self
    }

    pub fn with_purge(mut self, purge: bool) -> Self {
        self.purge_dedupe = purge;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        match self.kind {
            SamplerKind::Adaptive if !(self.beta > 0.0 && self.beta < 1.0) => Err(
                Error::InvalidConfig(format!("beta must lie in (0, 1), got {}", self.beta)),
            ),
            SamplerKind::Pkmv | SamplerKind::Fixed if !(self.p > 0.0 && self.p <= 1.0) => Err(
                Error::InvalidConfig(format!("p must lie in (0, 1], got {}", self.p)),
            ),
            _ => Ok(()),
        }
    }

    /// The reference threshold rule this sampler streams.
    pub fn tcf(&self) -> Tcf {
        match self.kind {
            SamplerKind::Kmv => Tcf::Kmv,
            SamplerKind::Adaptive => Tcf::Adaptive { beta: self.beta },
            SamplerKind::Pkmv => Tcf::Pkmv { p: self.p },
            SamplerKind::Fixed => Tcf::Fixed { p: self.p },
            SamplerKind::Alpha => Tcf::Alpha,
            SamplerKind::Biased => Tcf::Biased,
        }
    }
}

/// The k+1 smallest distinct hashes (KMV, pKMV and the biased rule).
#[derive(Clone, Debug)]
struct BottomK {
    capacity: usize,
    items: BTreeMap<UnitHash, StoredId>,
}

impl BottomK {
    #[inline]
    fn offer(&mut self, hash: UnitHash, id: impl FnOnce() -> StoredId) {
        if self.items.len() == self.capacity {
            let (&max, _) = self.items.last_key_value().expect("capacity >= 2");
            if hash >= max || self.items.contains_key(&hash) {
                return;
            }
            self.items.insert(hash, id());
            self.items.pop_last();
        } else {
            self.items.entry(hash).or_insert_with(id);
        }
    }

    /// Value of the `rank`-th (1-based) smallest retained hash.
    fn nth_value(&self, rank: usize) -> Option<f64> {
        self.items.keys().nth(rank - 1).map(|h| h.value())
    }
}

#[derive(Clone, Debug)]
enum State {
    Smallest(BottomK),
    Adaptive {
        level: u64,
        threshold: f64,
        /// Distinct hashes with value <= threshold.
        retained: BTreeMap<UnitHash, StoredId>,
    },
    Fixed {
        retained: BTreeMap<UnitHash, StoredId>,
    },
    Alpha(AlphaState),
}

#[derive(Clone, Debug)]
struct AlphaState {
    alpha: f64,
    dedupe: HashMap<UnitHash, StoredId>,
    prefix_complete: bool,
    level: u64,
    theta: f64,
    next_purge: usize,
}

/// Streaming state for one threshold rule.
#[derive(Clone, Debug)]
pub struct Sampler {
    config: SamplerConfig,
    state: State,
}

impl Sampler {
    pub fn new(config: SamplerConfig) -> Result<Self> {
        config.validate()?;
        let state = match config.kind {
            SamplerKind::Kmv | SamplerKind::Pkmv | SamplerKind::Biased => State::Smallest(BottomK {
                capacity: config.k + 1,
                items: BTreeMap::new(),
            }),
            SamplerKind::Adaptive => State::Adaptive {
                level: 0,
                threshold: 1.0,
                retained: BTreeMap::new(),
            },
            SamplerKind::Fixed => State::Fixed {
                retained: BTreeMap::new(),
            },
            SamplerKind::Alpha => State::Alpha(AlphaState {
                alpha: alpha_for(config.k),
                dedupe: HashMap::with_capacity(2 * config.k),
                prefix_complete: false,
                level: 0,
                theta: 1.0,
                next_purge: 4 * config.k,
            }),
        };
        Ok(Sampler { config, state })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    /// Hash `id` under the configured seed and process it.
    pub fn update(&mut self, id: &[u8]) {
        let hash = hash_identifier(id, self.config.seed);
        self.update_hashed(hash, id);
    }

    /// Process an identifier whose hash under the configured seed is already
    /// known. `id` is only read when identifiers are retained.
    pub fn update_hashed(&mut self, hash: UnitHash, id: &[u8]) {
        let retain = self.config.retain_ids;
        let stored = || retain.then(|| Box::<[u8]>::from(id));
        let k = self.config.k;
        match &mut self.state {
            State::Smallest(bottom) => bottom.offer(hash, stored),
            State::Adaptive {
                level,
                threshold,
                retained,
            } => {
                if hash.value() > *threshold || retained.contains_key(&hash) {
                    return;
                }
                retained.insert(hash, stored());
                let beta = self.config.beta;
                while retained.len() > k {
                    *level += 1;
                    *threshold *= beta;
                    let t = *threshold;
                    retained.retain(|h, _| h.value() <= t);
                }
            }
            State::Fixed { retained } => {
                if hash.value() < self.config.p {
                    retained.entry(hash).or_insert_with(stored);
                }
            }
            State::Alpha(st) => {
                if !st.prefix_complete {
                    st.dedupe.entry(hash).or_insert_with(stored);
                    st.prefix_complete = st.dedupe.len() == k;
                    return;
                }
                if hash.value() < st.theta && !st.dedupe.contains_key(&hash) {
                    st.level += 1;
                    st.theta *= st.alpha;
                    st.dedupe.insert(hash, stored());
                    if self.config.purge_dedupe && st.dedupe.len() >= st.next_purge {
                        let theta = st.theta;
                        st.dedupe.retain(|h, _| h.value() < theta);
                        st.next_purge = (2 * st.dedupe.len()).max(4 * k);
                    }
                }
            }
        }
    }

    /// Threshold the sketch would have if finalized now.
    pub fn theta(&self) -> f64 {
        match &self.state {
            State::Smallest(bottom) => self.smallest_theta(bottom),
            State::Adaptive { threshold, .. } => *threshold,
            State::Fixed { .. } => self.config.p,
            State::Alpha(st) => st.theta,
        }
    }

    fn smallest_theta(&self, bottom: &BottomK) -> f64 {
        let k = self.config.k;
        let kmv = bottom.nth_value(k + 1).unwrap_or(1.0);
        match self.config.kind {
            SamplerKind::Pkmv => kmv.min(self.config.p),
            SamplerKind::Biased => match (bottom.nth_value(k), bottom.nth_value(k + 1)) {
                (Some(m_k), Some(m_k1)) if (k as f64 - 1.0) / m_k > k as f64 / m_k1 => m_k,
                _ => kmv,
            },
            _ => kmv,
        }
    }

    /// Level counter of the Alpha sampler.
    pub fn alpha_level(&self) -> Option<u64> {
        match &self.state {
            State::Alpha(st) => Some(st.level),
            _ => None,
        }
    }

    /// Number of hashes held in the Alpha dedupe table.
    pub fn dedupe_len(&self) -> Option<usize> {
        match &self.state {
            State::Alpha(st) => Some(st.dedupe.len()),
            _ => None,
        }
    }

    /// HIP estimate `k / alpha^i` of the Alpha sampler.
    ///
    /// Before `k` distinct identifiers have arrived the level counter has not
    /// started and the exact distinct count is returned instead.
    pub fn hip_estimate(&self) -> Result<f64> {
        match &self.state {
            State::Alpha(st) if !st.prefix_complete => Ok(st.dedupe.len() as f64),
            State::Alpha(st) => Ok(self.config.k as f64 / st.theta),
            _ => Err(Error::WrongKind { expected: "alpha" }),
        }
    }

    /// Number of retained hashes below the current threshold, without
    /// building a sketch.
    pub fn sample_len(&self) -> usize {
        let theta = self.theta();
        let below = |h: &UnitHash| h.value() < theta;
        match &self.state {
            State::Smallest(bottom) => bottom.items.keys().filter(|h| below(h)).count(),
            State::Adaptive { retained, .. } | State::Fixed { retained } => {
                retained.keys().filter(|h| below(h)).count()
            }
            State::Alpha(st) => st.dedupe.keys().filter(|h| below(h)).count(),
        }
    }

    /// `|S| / theta` for the current state.
    pub fn estimate(&self) -> f64 {
        self.sample_len() as f64 / self.theta()
    }

    /// The sketch of the stream seen so far.
    pub fn snapshot(&self) -> ThetaSketch {
        self.clone().finalize()
    }

    pub fn finalize(self) -> ThetaSketch {
        let theta = self.theta();
        let Sampler { config, state } = self;
        let keep = |(h, id): (UnitHash, StoredId)| (h.value() < theta).then(|| Entry::new(h, id));
        let entries: Vec<Entry> = match state {
            State::Smallest(bottom) => bottom.items.into_iter().filter_map(keep).collect(),
            State::Adaptive { retained, .. } | State::Fixed { retained } => {
                retained.into_iter().filter_map(keep).collect()
            }
            State::Alpha(st) => st.dedupe.into_iter().filter_map(keep).collect(),
        };
        ThetaSketch::from_parts_unchecked(
            config.kind.tcf_kind(),
            config.k,
            config.seed,
            theta,
            config.retain_ids,
            entries,
        )
    }
}

/// Build a sketch from a whole stream of identifiers.
pub fn sketch_stream<I, B>(config: SamplerConfig, ids: I) -> Result<ThetaSketch>
where
    I: IntoIterator<Item = B>,
    B: AsRef<[u8]>,
{
    let mut sampler = Sampler::new(config)?;
    for id in ids {
        sampler.update(id.as_ref());
    }
    Ok(sampler.finalize())
}
