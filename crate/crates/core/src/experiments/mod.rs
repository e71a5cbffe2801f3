//! Monte Carlo drivers.
//!
//! Every run is a pure function of its parameters and the base seed in the
//! sampler config: trial `t` hashes with `base.derive_trial_seed(t)`, and the
//! per-trial values are reduced in trial order after the parallel phase. The
//! output therefore does not depend on the number of worker threads. Trials
//! run on the current rayon pool, or on a pool of `THETA_THREADS` threads when
//! that variable is set.

mod csv_out;
mod stats;
mod streams;

pub use csv_out::{
    write_accuracy_csv, write_alpha_distribution_csv, write_comparative_csv,
    write_covariance_csv, write_scatter_csv,
};
pub use stats::{CovarianceStats, TrialStats};
pub use streams::{Layout, StreamOrder, StreamSpec, Workload};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hash::{HashSeed, UnitHash};
use crate::sampler::{Sampler, SamplerConfig, SamplerKind};
use crate::setops::theta_union;
use crate::sketch::{Predicate, ThetaSketch};

/// Smallest trial count accepted by the drivers.
pub const MIN_TRIALS: usize = 100;

/// Quantity recorded per trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Estimator {
    /// `|P(S)| / theta` of the (union) sketch.
    Framework,
    /// `k / alpha^i` of a single Alpha sampler.
    Hip,
    /// `|S|`, compared against `k`.
    SampleSize,
}

/// A dedicated pool when `THETA_THREADS` is set, otherwise `None` to run on
/// the caller's rayon pool.
fn worker_pool() -> Result<Option<rayon::ThreadPool>> {
    let Ok(v) = std::env::var("THETA_THREADS") else {
        return Ok(None);
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("THETA_THREADS must be an integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map(Some)
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker threads: {e}")))
}

/// Run `trial` for every index and collect the results in index order.
fn run_trials<T, F>(trials: usize, trial: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    if trials < MIN_TRIALS {
        return Err(Error::InvalidConfig(format!(
            "need at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    let run = || (0..trials as u64).into_par_iter().map(&trial).collect();
    match worker_pool()? {
        Some(pool) => pool.install(run),
        None => run(),
    }
}

fn feed(sampler: &mut Sampler, order: &[u32], hashes: &[UnitHash], ids: &[Vec<u8>]) {
    for &i in order {
        sampler.update_hashed(hashes[i as usize], &ids[i as usize]);
    }
}

fn check_predicate(cfg: &SamplerConfig, predicate: &Predicate) -> Result<()> {
    if !predicate.is_all() && !cfg.retain_ids {
        return Err(Error::IdsUnavailable);
    }
    Ok(())
}

/// One sketch per stream and their union, all under `seed`.
fn union_of_streams(
    cfg: &SamplerConfig,
    workload: &Workload,
    orders: &[std::borrow::Cow<'_, [u32]>],
    hashes: &[UnitHash],
) -> Result<ThetaSketch> {
    let sketches = orders
        .iter()
        .map(|order| {
            let mut s = Sampler::new(cfg.clone())?;
            feed(&mut s, order, hashes, workload.ids());
            Ok(s.finalize())
        })
        .collect::<Result<Vec<_>>>()?;
    if sketches.len() == 1 {
        return Ok(sketches.into_iter().next().unwrap());
    }
    theta_union(&sketches)
}

/// Repeat one estimator over independent hash seeds.
///
/// The truth is the number of distinct identifiers across all streams that
/// satisfy `predicate` (or `k` for [`Estimator::SampleSize`]). With several
/// streams the framework estimate comes from their union.
pub fn run_estimator_trials(
    cfg: &SamplerConfig,
    spec: &StreamSpec,
    predicate: &Predicate,
    estimator: Estimator,
    trials: usize,
) -> Result<TrialStats> {
    cfg.validate()?;
    check_predicate(cfg, predicate)?;
    if estimator == Estimator::Hip {
        if cfg.kind != SamplerKind::Alpha {
            return Err(Error::WrongKind { expected: "alpha" });
        }
        if spec.stream_count() != 1 || !predicate.is_all() {
            return Err(Error::InvalidConfig(
                "the HIP estimate covers one whole stream only".into(),
            ));
        }
    }
    let workload = spec.materialize()?;
    let values = run_trials(trials, |t| {
        let seed = cfg.seed.derive_trial_seed(t);
        let cfg = cfg.clone().with_seed(seed);
        let hashes = workload.hashes(seed);
        let orders = workload.orders(seed);
        if estimator == Estimator::Hip || (orders.len() == 1 && predicate.is_all()) {
            let mut s = Sampler::new(cfg)?;
            feed(&mut s, &orders[0], &hashes, workload.ids());
            return match estimator {
                Estimator::Framework => Ok(s.estimate()),
                Estimator::Hip => s.hip_estimate(),
                Estimator::SampleSize => Ok(s.sample_len() as f64),
            };
        }
        let sk = union_of_streams(&cfg, &workload, &orders, &hashes)?;
        match estimator {
            Estimator::SampleSize => Ok(sk.len() as f64),
            _ => sk.estimate_subpopulation(predicate),
        }
    })?;
    let truth = match estimator {
        Estimator::SampleSize => cfg.k as f64,
        _ => workload.union_count(predicate) as f64,
    };
    Ok(TrialStats::from_values(&values, truth))
}

/// Union-of-sketches estimate against the single-sketch estimate of the
/// concatenated streams, both under the same hash seed in each trial.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparativeRecord {
    pub kind: SamplerKind,
    pub k: usize,
    pub streams: usize,
    pub layout: &'static str,
    pub union: TrialStats,
    pub concat: TrialStats,
}

impl ComparativeRecord {
    /// `var_union / var_concat`.
    pub fn ratio(&self) -> f64 {
        self.union.sample_variance / self.concat.sample_variance
    }
}

pub fn run_comparative_variance(
    cfg: &SamplerConfig,
    spec: &StreamSpec,
    predicate: &Predicate,
    trials: usize,
) -> Result<ComparativeRecord> {
    cfg.validate()?;
    check_predicate(cfg, predicate)?;
    if spec.stream_count() < 2 {
        return Err(Error::InvalidConfig("comparison needs at least two streams".into()));
    }
    let workload = spec.materialize()?;
    let pairs = run_trials(trials, |t| {
        let seed = cfg.seed.derive_trial_seed(t);
        let cfg = cfg.clone().with_seed(seed);
        let hashes = workload.hashes(seed);
        let orders = workload.orders(seed);
        let union = union_of_streams(&cfg, &workload, &orders, &hashes)?;
        let mut concat = Sampler::new(cfg)?;
        for order in &orders {
            feed(&mut concat, order, &hashes, workload.ids());
        }
        let concat = concat.finalize();
        Ok((
            union.estimate_subpopulation(predicate)?,
            concat.estimate_subpopulation(predicate)?,
        ))
    })?;
    let truth = workload.union_count(predicate) as f64;
    let (u, c): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok(ComparativeRecord {
        kind: cfg.kind,
        k: cfg.k,
        streams: spec.stream_count(),
        layout: spec.layout_name(),
        union: TrialStats::from_values(&u, truth),
        concat: TrialStats::from_values(&c, truth),
    })
}

/// Per-item estimates `V = [h(item) < theta] / theta` at two stream
/// positions, whose means should be 1 and covariance 0.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceRecord {
    pub kind: SamplerKind,
    pub k: usize,
    pub n: usize,
    pub positions: (usize, usize),
    pub first: TrialStats,
    pub second: TrialStats,
    pub covariance: CovarianceStats,
}

/// `n` distinct identifiers in sorted order; `positions` index the stream.
pub fn run_per_item_covariance(
    cfg: &SamplerConfig,
    n: usize,
    positions: (usize, usize),
    trials: usize,
) -> Result<CovarianceRecord> {
    cfg.validate()?;
    let (l1, l2) = positions;
    if l1 == l2 || l1 >= n || l2 >= n {
        return Err(Error::InvalidConfig(format!(
            "positions must be distinct and below n = {n}"
        )));
    }
    let workload = StreamSpec::single(n).materialize()?;
    let pairs = run_trials(trials, |t| {
        let seed = cfg.seed.derive_trial_seed(t);
        let hashes = workload.hashes(seed);
        let mut s = Sampler::new(cfg.clone().with_seed(seed))?;
        feed(&mut s, &workload.streams()[0], &hashes, workload.ids());
        let theta = s.theta();
        let v = |l: usize| f64::from(u8::from(hashes[l].value() < theta)) / theta;
        Ok((v(l1), v(l2)))
    })?;
    let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok(CovarianceRecord {
        kind: cfg.kind,
        k: cfg.k,
        n,
        positions,
        first: TrialStats::from_values(&a, 1.0),
        second: TrialStats::from_values(&b, 1.0),
        covariance: CovarianceStats::from_pairs(&a, &b),
    })
}

/// Estimator accuracy at one stream length.
#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyRow {
    pub n: usize,
    pub kind: SamplerKind,
    pub k: usize,
    pub stats: TrialStats,
}

/// Accuracy along a sweep of stream lengths.
///
/// Each trial streams identifiers `0, 1, ...` up to the largest length once
/// and records the estimate whenever the prefix length is in `n_sweep`, so
/// the points of one trial share a hash function.
pub fn run_accuracy_profile(
    configs: &[SamplerConfig],
    n_sweep: &[usize],
    trials: usize,
) -> Result<Vec<AccuracyRow>> {
    if n_sweep.is_empty() || n_sweep[0] == 0 || n_sweep.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "sweep must be positive and strictly increasing".into(),
        ));
    }
    let n_max = *n_sweep.last().unwrap();
    let workload = StreamSpec::single(n_max).materialize()?;
    let mut rows = Vec::with_capacity(configs.len() * n_sweep.len());
    for cfg in configs {
        cfg.validate()?;
        let per_trial = run_trials(trials, |t| {
            let seed = cfg.seed.derive_trial_seed(t);
            let hashes = workload.hashes(seed);
            let mut s = Sampler::new(cfg.clone().with_seed(seed))?;
            let mut out = Vec::with_capacity(n_sweep.len());
            let mut fed = 0;
            for &n in n_sweep {
                feed(&mut s, &workload.streams()[0][fed..n], &hashes, workload.ids());
                fed = n;
                out.push(s.estimate());
            }
            Ok(out)
        })?;
        for (j, &n) in n_sweep.iter().enumerate() {
            let values: Vec<f64> = per_trial.iter().map(|v| v[j]).collect();
            rows.push(AccuracyRow {
                n,
                kind: cfg.kind,
                k: cfg.k,
                stats: TrialStats::from_values(&values, n as f64),
            });
        }
    }
    Ok(rows)
}

/// Lengths `round(lo * 2^(j / per_octave))` from `lo` up to `hi`, without
/// repeats.
pub fn geometric_sweep(lo: usize, hi: usize, per_octave: usize) -> Result<Vec<usize>> {
    if lo == 0 || hi < lo || per_octave == 0 {
        return Err(Error::InvalidConfig(
            "sweep needs 1 <= lo <= hi and at least one point per octave".into(),
        ));
    }
    let mut out: Vec<usize> = Vec::new();
    for j in 0.. {
        let n = (lo as f64 * (j as f64 / per_octave as f64).exp2()).round() as usize;
        if n > hi {
            break;
        }
        if out.last() != Some(&n) {
            out.push(n);
        }
    }
    Ok(out)
}

/// Parameters of the synthetic overlap scatter.
#[derive(Clone, Debug, PartialEq)]
pub struct ScatterParams {
    /// Inclusive range stream sizes are drawn from.
    pub size_range: (usize, usize),
    /// Target similarities `|A1 ∩ A2| / min(|A1|, |A2|)`, cycled over pairs.
    /// A target of 1 or more produces two shuffles of the same identifiers.
    pub similarities: Vec<f64>,
    pub k: usize,
    pub trials_per_pair: usize,
    pub pairs: usize,
    pub seed: HashSeed,
}

impl Default for ScatterParams {
    fn default() -> Self {
        ScatterParams {
            size_range: (201, 5429),
            similarities: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            k: 128,
            trials_per_pair: 1000,
            pairs: 20,
            seed: HashSeed(1),
        }
    }
}

/// Relative errors of the Alpha union and concatenation estimates on one
/// pair of streams.
#[derive(Clone, Debug, PartialEq)]
pub struct ScatterRow {
    pub size_a: usize,
    pub size_b: usize,
    pub intersection: usize,
    pub sim: f64,
    pub re_union: f64,
    pub re_concat: f64,
}

impl ScatterRow {
    /// Whether the union was at least as accurate as the concatenation.
    pub fn conforms(&self) -> bool {
        self.re_union <= self.re_concat
    }
}

pub fn run_overlap_scatter(params: &ScatterParams) -> Result<Vec<ScatterRow>> {
    let (lo, hi) = params.size_range;
    if lo == 0 || lo > hi || params.similarities.is_empty() {
        return Err(Error::InvalidConfig("bad scatter size range or similarities".into()));
    }
    if params.similarities.iter().any(|s| s.is_nan() || *s < 0.0) {
        return Err(Error::InvalidConfig("similarities must be non-negative".into()));
    }
    (0..params.pairs)
        .map(|p| {
            let pair_seed = params.seed.derive_trial_seed(p as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(pair_seed.get());
            let size_a = rng.random_range(lo..=hi);
            let target = params.similarities[p % params.similarities.len()];
            let spec = if target >= 1.0 {
                StreamSpec::permutations(size_a, 2)
            } else {
                let size_b = rng.random_range(lo..=hi);
                let shared = (target * size_a.min(size_b) as f64).round() as usize;
                StreamSpec::overlapping(vec![size_a, size_b], shared)
                    .with_order(StreamOrder::Shuffled)
            };
            let cfg = SamplerConfig::alpha(params.k, pair_seed);
            let rec = run_comparative_variance(&cfg, &spec, &Predicate::All, params.trials_per_pair)?;
            let (size_b, intersection) = match spec.layout {
                Layout::Permutations { base_size, .. } => (base_size, base_size),
                Layout::Overlapping { ref sizes, shared } => (sizes[1], shared),
                Layout::DisjointRanges { .. } => unreachable!(),
            };
            Ok(ScatterRow {
                size_a,
                size_b,
                intersection,
                sim: intersection as f64 / size_a.min(size_b) as f64,
                re_union: rec.union.rmse_over_truth,
                re_concat: rec.concat.rmse_over_truth,
            })
        })
        .collect()
}
