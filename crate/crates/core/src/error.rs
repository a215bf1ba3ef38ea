use thiserror::Error;

use crate::model::{SchoolId, StudentId, Violation};

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid problem: {}", join_violations(.0))]
    InvalidProblem(Vec<Violation>),

    #[error("unknown student `{0}`")]
    UnknownStudent(StudentId),

    #[error("unknown school `{0}`")]
    UnknownSchool(SchoolId),

    #[error("preference profile of student `{0}` does not rank every school")]
    IncompleteProfile(StudentId),

    #[error("invalid matching: {0}")]
    InvalidMatching(String),

    #[error("invalid transform: {0}")]
    InvalidTransform(String),

    #[error("rank {0} is outside the transform's domain")]
    RankOutOfDomain(u32),

    #[error("{what} is {actual}, above the limit of {limit}")]
    GuardExceeded {
        what: &'static str,
        actual: usize,
        limit: usize,
    },

    #[error("assignment kernel exceeded {cap} adjustment steps on a {dimension}x{dimension} grid ({matched} rows matched)")]
    IterationCap {
        cap: usize,
        dimension: usize,
        matched: usize,
    },

    #[error("malformed cost grid: {0}")]
    MalformedGrid(String),

    #[error("optimum enumeration stopped at the cap of {0} matchings")]
    NotExhaustive(usize),

    #[error("invalid tie-break policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid instance spec: {0}")]
    InvalidSpec(String),

    #[error("invalid ranking functions: {0}")]
    RankingMismatch(String),

    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn join_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
