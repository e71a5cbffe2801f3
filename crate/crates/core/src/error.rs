use std::path::PathBuf;

use thiserror::Error;

use crate::sketch::Violation;

/// Errors produced by sketch construction, combination, oracles and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("predicate needs identifiers but the sketch does not retain them")]
    IdsUnavailable,

    #[error("hash seed mismatch: {left:016x} vs {right:016x}")]
    SeedMismatch { left: u64, right: u64 },

    #[error("set operation needs at least one input sketch")]
    EmptyInput,

    #[error("operation requires a {expected} sampler")]
    WrongKind { expected: &'static str },

    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),

    #[error("argument outside the formula's domain: {0}")]
    Domain(String),

    #[error("no closed form for q = {0} (only q in 0..=2)")]
    UnsupportedQ(u32),

    #[error("u = {u} exceeds the dynamic-programming limit of {limit}")]
    ResourceLimit { u: usize, limit: usize },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("sketch violates {} invariant(s); first: {}", .0.len(), .0[0])]
    Invariant(Vec<Violation>),

    #[error("i/o error{}: {source}", path.as_ref().map(|p| format!(" on {}", p.display())).unwrap_or_default())]
    Io {
        path: Option<PathBuf>,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl From<std::io::Error> for Error {
    fn from(source: std::io::Error) -> Self {
        Error::Io { path: None, source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
