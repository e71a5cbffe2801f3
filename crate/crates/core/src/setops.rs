//! Union, intersection and difference of theta sketches.
//!
//! All three share one rule: the result's threshold is the smallest input
//! threshold, and only hashes below it survive. Inputs may come from
//! different threshold rules and different `k`; they must share a hash seed.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::hash::{HashSeed, UnitHash};
use crate::sketch::{Entry, TcfKind, ThetaSketch};

fn common_seed(sketches: &[&ThetaSketch]) -> Result<HashSeed> {
    let first = sketches.first().ok_or(Error::EmptyInput)?;
    let seed = first.seed();
    for sk in &sketches[1..] {
        if sk.seed() != seed {
            return Err(Error::SeedMismatch {
                left: seed.get(),
                right: sk.seed().get(),
            });
        }
    }
    Ok(seed)
}

struct Combined {
    seed: HashSeed,
    theta: f64,
    k: usize,
    retains_ids: bool,
}

fn combine(sketches: &[&ThetaSketch]) -> Result<Combined> {
    let seed = common_seed(sketches)?;
    Ok(Combined {
        seed,
        theta: sketches.iter().map(|s| s.theta()).fold(1.0, f64::min),
        k: sketches.iter().map(|s| s.k()).min().unwrap_or(1),
        retains_ids: sketches.iter().all(|s| s.retains_ids()),
    })
}

fn entry_for(e: &Entry, retains_ids: bool) -> Entry {
    Entry::new(e.hash, if retains_ids { e.id.clone() } else { None })
}

/// Union: `theta_U = min theta_j`, keeping every input hash below `theta_U`.
///
/// The union keeps all qualifying hashes instead of cutting back to `k`, so
/// it can hold more than `k` samples.
pub fn theta_union<'a, I>(sketches: I) -> Result<ThetaSketch>
where
    I: IntoIterator<Item = &'a ThetaSketch>,
{
    let inputs: Vec<&ThetaSketch> = sketches.into_iter().collect();
    let c = combine(&inputs)?;
    let mut merged: BTreeMap<UnitHash, Entry> = BTreeMap::new();
    for sk in &inputs {
        for e in sk.entries() {
            if e.hash.value() < c.theta {
                merged
                    .entry(e.hash)
                    .or_insert_with(|| entry_for(e, c.retains_ids));
            }
        }
    }
    Ok(ThetaSketch::from_parts_unchecked(
        TcfKind::Union,
        c.k,
        c.seed,
        c.theta,
        c.retains_ids,
        merged.into_values().collect(),
    ))
}

/// Intersection: hashes present in every input and below `min theta_j`.
pub fn theta_intersect<'a, I>(sketches: I) -> Result<ThetaSketch>
where
    I: IntoIterator<Item = &'a ThetaSketch>,
{
    let inputs: Vec<&ThetaSketch> = sketches.into_iter().collect();
    let c = combine(&inputs)?;
    let (first, rest) = inputs.split_first().ok_or(Error::EmptyInput)?;
    let entries = first
        .entries()
        .iter()
        .filter(|e| e.hash.value() < c.theta && rest.iter().all(|sk| sk.contains(e.hash)))
        .map(|e| entry_for(e, c.retains_ids))
        .collect();
    Ok(ThetaSketch::from_parts_unchecked(
        TcfKind::Intersect,
        c.k,
        c.seed,
        c.theta,
        c.retains_ids,
        entries,
    ))
}

/// Difference `A \ B`: hashes of `a` absent from `b`, below `min(theta_a, theta_b)`.
pub fn theta_a_not_b(a: &ThetaSketch, b: &ThetaSketch) -> Result<ThetaSketch> {
    let c = combine(&[a, b])?;
    // Identifiers only need to come from `a`.
    let retains_ids = a.retains_ids();
    let entries = a
        .entries()
        .iter()
        .filter(|e| e.hash.value() < c.theta && !b.contains(e.hash))
        .map(|e| entry_for(e, retains_ids))
        .collect();
    Ok(ThetaSketch::from_parts_unchecked(
        TcfKind::Difference,
        c.k,
        c.seed,
        c.theta,
        retains_ids,
        entries,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(v: f64) -> UnitHash {
        UnitHash::from_raw(((v * (1u64 << 52) as f64) as u64) << 12)
    }

    fn sk(theta: f64, vals: &[f64]) -> ThetaSketch {
        let entries = vals.iter().map(|&v| Entry::hash_only(at(v))).collect();
        ThetaSketch::new(TcfKind::Kmv, 2, HashSeed(5), theta, false, entries).unwrap()
    }

    fn vals(s: &ThetaSketch) -> Vec<u64> {
        s.entries().iter().map(|e| e.hash.raw()).collect()
    }

    #[test]
    fn union_example() {
        let (a, b) = (sk(0.5, &[0.1, 0.2]), sk(0.25, &[0.05, 0.2]));
        let u = theta_union([&a, &b]).unwrap();
        assert_eq!(u.theta(), 0.25);
        assert_eq!(vals(&u), vals(&sk(0.25, &[0.05, 0.1, 0.2])));
        assert_eq!(u.estimate(), 12.0);
        assert_eq!(u.kind(), TcfKind::Union);
        assert!(u.validate().is_empty());
    }

    #[test]
    fn intersect_example() {
        let (a, b) = (sk(0.5, &[0.1, 0.2]), sk(0.25, &[0.05, 0.2]));
        let i = theta_intersect([&a, &b]).unwrap();
        assert_eq!(i.theta(), 0.25);
        assert_eq!(vals(&i), vec![at(0.2).raw()]);
        assert_eq!(i.estimate(), 4.0);
        let disjoint = theta_intersect([&sk(0.5, &[0.1]), &sk(0.5, &[0.2])]).unwrap();
        assert_eq!(disjoint.estimate(), 0.0);
    }

    #[test]
    fn difference_example() {
        let (a, b) = (sk(0.5, &[0.1, 0.2]), sk(0.25, &[0.05, 0.2]));
        let d = theta_a_not_b(&a, &b).unwrap();
        assert_eq!(d.theta(), 0.25);
        assert_eq!(vals(&d), vec![at(0.1).raw()]);
        assert_eq!(d.estimate(), 4.0);
        assert_eq!(theta_a_not_b(&a, &a).unwrap().estimate(), 0.0);
        let empty = sk(1.0, &[]);
        assert!(theta_a_not_b(&a, &empty).unwrap().same_sample(&a));
    }

    #[test]
    fn identities() {
        let a = sk(0.5, &[0.1, 0.2]);
        assert!(theta_union([&a]).unwrap().same_sample(&a));
        assert!(theta_union([&a, &a]).unwrap().same_sample(&a));
        assert!(theta_intersect([&a, &a]).unwrap().same_sample(&a));
    }

    #[test]
    fn errors() {
        let a = sk(0.5, &[0.1]);
        let other = ThetaSketch::new(TcfKind::Kmv, 2, HashSeed(6), 1.0, false, vec![]).unwrap();
        assert!(matches!(
            theta_union([&a, &other]),
            Err(Error::SeedMismatch { left: 5, right: 6 })
        ));
        assert!(matches!(theta_intersect([&a, &other]), Err(Error::SeedMismatch { .. })));
        assert!(matches!(theta_a_not_b(&a, &other), Err(Error::SeedMismatch { .. })));
        assert!(matches!(theta_union(std::iter::empty()), Err(Error::EmptyInput)));
        assert!(matches!(theta_intersect(std::iter::empty()), Err(Error::EmptyInput)));
    }
}
