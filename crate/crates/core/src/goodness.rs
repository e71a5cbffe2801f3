//! Grid checks of the shape conditions that make a threshold rule unbiased.
//!
//! Fix every hash of a stream except the one at position `l` and view the
//! threshold as a function `T(x)` of that free hash. The rule passes the
//! univariate check on that projection when some fixed `F` satisfies
//!
//! * (a) `x < F  =>  T(x) = F`, and
//! * (b) `x >= F =>  T(x) <= x`.
//!
//! The bivariate check frees two positions and uses `max(x, y)` in place of
//! `x`. Both checks evaluate the projection on a midpoint grid of `(0, 1)`:
//! a reported violation is a genuine counterexample, a pass is evidence only.
//!
//! [`check_monotonicity`] tests the sandwich property `T(A0 A1 A2) <= T(A1)`.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::hash::UnitHash;
use crate::tcf::Tcf;

/// Default grid resolution.
pub const DEFAULT_GRID: usize = 4096;

/// A threshold rule as a black box over concrete hash values.
pub trait ThresholdFn {
    fn threshold(&self, k: usize, stream: &[f64]) -> f64;
}

impl ThresholdFn for Tcf {
    fn threshold(&self, k: usize, stream: &[f64]) -> f64 {
        Tcf::threshold(self, k, stream)
    }
}

impl<F: Fn(usize, &[f64]) -> f64> ThresholdFn for F {
    fn threshold(&self, k: usize, stream: &[f64]) -> f64 {
        self(k, stream)
    }
}

/// The threshold a union of several streams ends up with: each member stream
/// is a list of positions into the combined hash vector, sketched with its own
/// rule, and the union takes the minimum threshold.
///
/// Positions may repeat across members (overlapping streams share hashes).
#[derive(Clone, Debug)]
pub struct UnionTcf {
    members: Vec<(Tcf, Vec<usize>)>,
}

impl UnionTcf {
    pub fn new(members: Vec<(Tcf, Vec<usize>)>) -> Self {
        assert!(!members.is_empty(), "union needs at least one member stream");
        UnionTcf { members }
    }

    pub fn members(&self) -> &[(Tcf, Vec<usize>)] {
        &self.members
    }
}

impl ThresholdFn for UnionTcf {
    fn threshold(&self, k: usize, stream: &[f64]) -> f64 {
        let mut buf = Vec::with_capacity(stream.len());
        self.members
            .iter()
            .map(|(tcf, positions)| {
                buf.clear();
                buf.extend(positions.iter().map(|&p| stream[p]));
                tcf.threshold(k, &buf)
            })
            .fold(1.0, f64::min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subcondition {
    /// Below `F` the threshold must equal `F`.
    A,
    /// At or above `F` the threshold must not exceed the free hash.
    B,
}

/// Where a projection broke the shape condition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Counterexample {
    pub x: f64,
    /// Second free hash, for bivariate checks.
    pub y: Option<f64>,
    pub theta: f64,
    pub subcondition: Subcondition,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionReport {
    pub satisfied: bool,
    /// The candidate `F`: the threshold at the smallest grid point.
    pub fixed_threshold: Option<f64>,
    pub counterexample: Option<Counterexample>,
}

impl ProjectionReport {
    fn pass(f: f64) -> Self {
        ProjectionReport {
            satisfied: true,
            fixed_threshold: Some(f),
            counterexample: None,
        }
    }

    fn fail(f: f64, c: Counterexample) -> Self {
        ProjectionReport {
            satisfied: false,
            fixed_threshold: Some(f),
            counterexample: Some(c),
        }
    }
}

fn grid(points: usize) -> impl Iterator<Item = f64> + Clone {
    (0..points).map(move |j| (j as f64 + 0.5) / points as f64)
}

fn check_pre(fixed: &[f64], grid_points: usize) {
    assert!(grid_points >= 100, "grid needs at least 100 points");
    let mut sorted = fixed.to_vec();
    sorted.sort_by(f64::total_cmp);
    assert!(
        sorted.windows(2).all(|w| w[0] < w[1]),
        "fixed hashes must be distinct"
    );
    assert!(
        fixed.iter().all(|&h| h > 0.0 && h < 1.0),
        "fixed hashes must lie in (0, 1)"
    );
}

#[inline]
fn judge(f: f64, pivot: f64, theta: f64) -> Option<Subcondition> {
    if pivot < f {
        (theta.to_bits() != f.to_bits()).then_some(Subcondition::A)
    } else {
        (theta > pivot).then_some(Subcondition::B)
    }
}

/// Univariate check with the free hash inserted at stream index `free`
/// (`0..=fixed.len()`).
pub fn check_one_goodness<T: ThresholdFn + ?Sized>(
    tcf: &T,
    k: usize,
    fixed: &[f64],
    free: usize,
    grid_points: usize,
) -> ProjectionReport {
    check_pre(fixed, grid_points);
    assert!(free <= fixed.len(), "free position out of range");
    let mut stream = fixed.to_vec();
    stream.insert(free, 0.5);
    let xs = grid(grid_points).filter(|x| !fixed.contains(x));
    let mut f = None;
    for x in xs {
        stream[free] = x;
        let theta = tcf.threshold(k, &stream);
        let f = *f.get_or_insert(theta);
        if let Some(sub) = judge(f, x, theta) {
            return ProjectionReport::fail(
                f,
                Counterexample {
                    x,
                    y: None,
                    theta,
                    subcondition: sub,
                },
            );
        }
    }
    ProjectionReport::pass(f.unwrap_or(1.0))
}

/// Bivariate check with free hashes at stream indices `free.0 < free.1`
/// of the combined stream of length `fixed.len() + 2`.
pub fn check_two_goodness<T: ThresholdFn + ?Sized>(
    tcf: &T,
    k: usize,
    fixed: &[f64],
    free: (usize, usize),
    grid_points: usize,
) -> ProjectionReport {
    check_pre(fixed, grid_points);
    let (l1, l2) = free;
    assert!(l1 < l2 && l2 <= fixed.len() + 1, "free positions out of range");
    let mut stream = fixed.to_vec();
    stream.insert(l1, 0.5);
    stream.insert(l2, 0.5);
    let xs: Vec<f64> = grid(grid_points).filter(|x| !fixed.contains(x)).collect();
    let mut f = None;
    for &x in &xs {
        stream[l1] = x;
        for &y in &xs {
            if x == y {
                // two identifiers never share a hash
                continue;
            }
            stream[l2] = y;
            let theta = tcf.threshold(k, &stream);
            let f = *f.get_or_insert(theta);
            if let Some(sub) = judge(f, x.max(y), theta) {
                return ProjectionReport::fail(
                    f,
                    Counterexample {
                        x,
                        y: Some(y),
                        theta,
                        subcondition: sub,
                    },
                );
            }
        }
    }
    ProjectionReport::pass(f.unwrap_or(1.0))
}

/// `T(A0 A1 A2) <= T(A1)`.
pub fn check_monotonicity<T: ThresholdFn + ?Sized>(
    tcf: &T,
    k: usize,
    a0: &[f64],
    a1: &[f64],
    a2: &[f64],
) -> bool {
    let sandwiched: Vec<f64> = a0.iter().chain(a1).chain(a2).copied().collect();
    tcf.threshold(k, &sandwiched) <= tcf.threshold(k, a1)
}

/// `count` distinct hash values drawn uniformly from `(0, 1)`.
pub fn random_hashes(rng: &mut ChaCha8Rng, count: usize) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(count);
    while out.len() < count {
        let v = UnitHash::from_raw(rng.random::<u64>()).value();
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// One randomized instance of the goodness suite.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteRow {
    pub seed: u64,
    pub k: usize,
    /// Length of the stream including the free positions.
    pub n: usize,
    pub free: Vec<usize>,
    pub report: ProjectionReport,
}

/// Univariate checks over every free position of a random stream of length
/// `2..=max_len`, for one seed.
pub fn one_goodness_instances<T: ThresholdFn + ?Sized>(
    tcf: &T,
    k: usize,
    seed: u64,
    max_len: usize,
    grid_points: usize,
) -> Vec<SuiteRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=max_len.max(2));
    let fixed = random_hashes(&mut rng, n - 1);
    (0..n)
        .map(|free| SuiteRow {
            seed,
            k,
            n,
            free: vec![free],
            report: check_one_goodness(tcf, k, &fixed, free, grid_points),
        })
        .collect()
}

/// One bivariate check on a random stream of length `2..=max_len` with a
/// random pair of free positions.
pub fn two_goodness_instance<T: ThresholdFn + ?Sized>(
    tcf: &T,
    k: usize,
    seed: u64,
    max_len: usize,
    grid_points: usize,
) -> SuiteRow {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x2_6009);
    let n = rng.random_range(2..=max_len.max(2));
    let fixed = random_hashes(&mut rng, n - 2);
    let l1 = rng.random_range(0..n - 1);
    let l2 = rng.random_range(l1 + 1..n);
    SuiteRow {
        seed,
        k,
        n,
        free: vec![l1, l2],
        report: check_two_goodness(tcf, k, &fixed, (l1, l2), grid_points),
    }
}
