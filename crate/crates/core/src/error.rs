use thiserror::Error;

/// Errors raised by matrix construction, parsing and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("demand index {demand} out of range (N = {n_demand})")]
    DemandOutOfRange { demand: usize, n_demand: usize },
    #[error("candidate index {candidate} out of range (m = {n_candidates})")]
    CandidateOutOfRange { candidate: usize, n_candidates: usize },
    #[error("invalid cost {cost} for demand {demand}, candidate {candidate}")]
    InvalidCost { demand: usize, candidate: usize, cost: f64 },
    #[error("duplicate entry for demand {demand}, candidate {candidate}")]
    DuplicateEntry { demand: usize, candidate: usize },
    #[error("invalid penalty {penalty} for demand {demand}")]
    InvalidPenalty { demand: usize, penalty: f64 },
    #[error("demand {demand} has no candidate within reach; full coverage is impossible")]
    IsolatedDemand { demand: usize },
    #[error("medoid set must not be empty")]
    EmptyMedoids,
    #[error("candidate {0} appears more than once in the medoid list")]
    DuplicateMedoid(usize),
    #[error("invalid medoid count {count} (m = {n_candidates})")]
    InvalidCount { count: usize, n_candidates: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("brute force limited to m <= {limit} candidates, got {m}")]
    TooManyCandidates { m: usize, limit: usize },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("cache mismatch: {0}")]
    CacheMismatch(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
