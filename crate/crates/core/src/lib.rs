//! Theta sketches: distinct counting over streams, subpopulations and set
//! expressions.
//!
//! A theta sketch is a pair `(theta, S)`: a threshold in `(0, 1]` and every
//! distinct hash of the stream that falls below it. `|S| / theta` estimates
//! the number of distinct identifiers; counting only the entries whose
//! identifier satisfies a predicate estimates the size of a subpopulation.
//! Sketches built with the same hash seed combine by taking the smallest
//! threshold, whatever rule chose each input's threshold.
//!
//! Modules:
//!
//! * [`hash`]: seeded hashing into `(0, 1)`;
//! * [`sketch`]: the sketch type, estimators and predicates;
//! * [`tcf`] and [`sampler`]: threshold rules (KMV, adaptive sampling, pKMV,
//!   fixed rate, Alpha) as whole-stream references and as streaming samplers;
//! * [`setops`]: union, intersection, difference;
//! * [`oracles`]: exact level distribution of the Alpha sampler and
//!   closed-form moments;
//! * [`goodness`]: grid checks of the shape conditions behind unbiasedness;
//! * [`experiments`]: Monte Carlo drivers;
//! * [`io`]: the text file format and stream reading.

pub mod error;
pub mod experiments;
pub mod goodness;
pub mod hash;
pub mod io;
pub mod oracles;
pub mod sampler;
pub mod setops;
pub mod sketch;
pub mod tcf;

pub use error::{Error, Result};
pub use hash::{hash_identifier, HashSeed, UnitHash};
pub use sampler::{sketch_stream, Sampler, SamplerConfig, SamplerKind};
pub use setops::{theta_a_not_b, theta_intersect, theta_union};
pub use sketch::{Entry, Predicate, TcfKind, ThetaSketch};
pub use tcf::Tcf;

/// The guide's code samples, compiled and run as doc-tests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/hashing.md")]
    mod hashing {}
    #[doc = include_str!("../../../book/src/threshold-rules.md")]
    mod threshold_rules {}
    #[doc = include_str!("../../../book/src/set-operations.md")]
    mod set_operations {}
    #[doc = include_str!("../../../book/src/alpha.md")]
    mod alpha {}
    #[doc = include_str!("../../../book/src/oracles.md")]
    mod oracles {}
    #[doc = include_str!("../../../book/src/goodness.md")]
    mod goodness {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
