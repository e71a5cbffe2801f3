//! Reference threshold choosing functions.
//!
//! Each function here computes `theta` directly from a whole stream of hash
//! values, the slow and obvious way. The streaming samplers in
//! [`crate::sampler`] must agree with these bit for bit; the goodness checks
//! in [`crate::goodness`] probe them on hand-built instances.
//!
//! Conventions shared by all rules:
//!
//! * hashes are deduplicated by [`HashPoint::order_key`];
//! * when the order statistic a rule needs does not exist (fewer than `k + 1`
//!   distinct hashes, or fewer than `k` for the Alpha rule) the threshold is
//!   `1`, which keeps every hash and counts exactly;
//! * powers of `alpha` and `beta` are produced by [`ladder_power`], i.e. by
//!   repeated multiplication from `1.0`, so every code path yields the same
//!   bits for the same exponent.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::hash::{cmp_points, HashPoint};

/// `base^exponent` by repeated multiplication starting from `1.0`.
#[inline]
pub fn ladder_power(base: f64, exponent: u64) -> f64 {
    let mut p = 1.0;
    for _ in 0..exponent {
        p *= base;
    }
    p
}

/// `k / (k + 1)`.
#[inline]
pub fn alpha_for(k: usize) -> f64 {
    k as f64 / (k as f64 + 1.0)
}

/// The threshold rules shipped with the crate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tcf {
    /// `theta = m_{k+1}`, the (k+1)-st smallest distinct hash.
    Kmv,
    /// Largest `beta^i` strictly below `m_{k+1}`.
    Adaptive { beta: f64 },
    /// `min(m_{k+1}, p)`.
    Pkmv { p: f64 },
    /// Constant `p`.
    Fixed { p: f64 },
    /// `alpha^i` from the order-sensitive level counter.
    Alpha,
    /// Upward-biased counterexample; see [`biased_threshold`].
    Biased,
}

impl Tcf {
    pub fn name(&self) -> &'static str {
        match self {
            Tcf::Kmv => "kmv",
            Tcf::Adaptive { .. } => "adaptive",
            Tcf::Pkmv { .. } => "pkmv",
            Tcf::Fixed { .. } => "fixed",
            Tcf::Alpha => "alpha",
            Tcf::Biased => "biased",
        }
    }

    /// Threshold chosen for `stream` with target size `k`.
    ///
    /// The biased rule falls back to exact mode on streams with fewer than
    /// `k + 1` distinct hashes, like the other order-statistic rules.
    pub fn threshold<H: HashPoint>(&self, k: usize, stream: &[H]) -> f64 {
        match *self {
            Tcf::Kmv => kmv_threshold(stream, k),
            Tcf::Adaptive { beta } => adaptive_threshold(stream, k, beta),
            Tcf::Pkmv { p } => pkmv_threshold(stream, k, p),
            Tcf::Fixed { p } => p,
            Tcf::Alpha => alpha_threshold(stream, k),
            Tcf::Biased => biased_threshold(stream, k).unwrap_or(1.0),
        }
    }
}

/// The `count` smallest distinct hashes, ascending.
pub(crate) fn smallest_distinct<H: HashPoint>(stream: &[H], count: usize) -> Vec<H> {
    let mut v = stream.to_vec();
    v.sort_unstable_by(cmp_points);
    v.dedup_by_key(|h| h.order_key());
    v.truncate(count);
    v
}

/// Value of the `rank`-th (1-based) smallest distinct hash, if it exists.
fn order_statistic<H: HashPoint>(stream: &[H], rank: usize) -> Option<f64> {
    smallest_distinct(stream, rank)
        .get(rank - 1)
        .map(|h| h.unit_value())
}

pub fn kmv_threshold<H: HashPoint>(stream: &[H], k: usize) -> f64 {
    order_statistic(stream, k + 1).unwrap_or(1.0)
}

pub fn adaptive_threshold<H: HashPoint>(stream: &[H], k: usize, beta: f64) -> f64 {
    match order_statistic(stream, k + 1) {
        None => 1.0,
        Some(m) => {
            let mut theta = 1.0;
            while theta >= m {
                theta *= beta;
            }
            theta
        }
    }
}

pub fn pkmv_threshold<H: HashPoint>(stream: &[H], k: usize, p: f64) -> f64 {
    kmv_threshold(stream, k).min(p)
}

/// Final level `i` of the Alpha rule, or `None` when the stream has fewer
/// than `k` distinct hashes.
pub fn alpha_level<H: HashPoint>(stream: &[H], k: usize) -> Option<u64> {
    // Linear scans beat hashing on the tiny streams of the goodness checks.
    if stream.len() <= SHORT_STREAM {
        let mut seen: Vec<u64> = Vec::with_capacity(stream.len());
        alpha_level_with(stream, k, |key| {
            let fresh = !seen.contains(&key);
            if fresh {
                seen.push(key);
            }
            (fresh, seen.len())
        })
    } else {
        let mut seen: HashSet<u64> = HashSet::with_capacity(k + 1);
        alpha_level_with(stream, k, |key| (seen.insert(key), seen.len()))
    }
}

const SHORT_STREAM: usize = 64;

/// `insert` adds a key to the seen set, returning whether it was new and the
/// set's size afterwards.
fn alpha_level_with<H: HashPoint>(
    stream: &[H],
    k: usize,
    mut insert: impl FnMut(u64) -> (bool, usize),
) -> Option<u64> {
    let mut rest = None;
    for (pos, h) in stream.iter().enumerate() {
        if insert(h.order_key()).1 == k {
            rest = Some(&stream[pos + 1..]);
            break;
        }
    }
    let suffix = rest?;
    let alpha = alpha_for(k);
    let mut level = 0;
    // always equal to ladder_power(alpha, level)
    let mut theta = 1.0;
    for h in suffix {
        if h.unit_value() < theta && insert(h.order_key()).0 {
            level += 1;
            theta *= alpha;
        }
    }
    Some(level)
}

pub fn alpha_threshold<H: HashPoint>(stream: &[H], k: usize) -> f64 {
    alpha_level(stream, k).map_or(1.0, |i| ladder_power(alpha_for(k), i))
}

/// `m_k` if `(k-1)/m_k > k/m_{k+1}`, else `m_{k+1}`.
///
/// Picks whichever of the two candidate thresholds gives the larger estimate,
/// which makes the resulting estimator biased upwards.
pub fn biased_threshold<H: HashPoint>(stream: &[H], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("biased threshold needs k >= 1".into()));
    }
    let smallest = smallest_distinct(stream, k + 1);
    if smallest.len() < k + 1 {
        return Err(Error::Domain(format!(
            "biased threshold needs {} distinct hashes, stream has {}",
            k + 1,
            smallest.len()
        )));
    }
    let m_k = smallest[k - 1].unit_value();
    let m_k1 = smallest[k].unit_value();
    Ok(if (k as f64 - 1.0) / m_k > k as f64 / m_k1 {
        m_k
    } else {
        m_k1
    })
}

/// Distinct hashes of `stream` strictly below `theta`, ascending.
pub fn sample_below<H: HashPoint>(stream: &[H], theta: f64) -> Vec<H> {
    let below: Vec<H> = stream
        .iter()
        .copied()
        .filter(|h| h.unit_value() < theta)
        .collect();
    smallest_distinct(&below, usize::MAX)
}
