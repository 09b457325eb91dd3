use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the hiring-market library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("{path}: expected header `{expected}`, found `{found}`")]
    BadHeader {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("duplicate institution id `{0}`")]
    DuplicateInstitution(String),
    #[error("invalid region `{0}`")]
    InvalidRegion(String),
    #[error("unknown institution `{0}`")]
    UnknownInstitution(String),
    #[error("invalid year `{0}`")]
    InvalidYear(String),
    #[error("invalid gender token `{0}`")]
    InvalidGender(String),
    #[error("invalid value `{value}` in column `{column}`")]
    InvalidField { column: &'static str, value: String },
    #[error("ordering does not cover node `{0}`")]
    OrderingMissingNode(String),
    #[error("network has {0} nodes; exhaustive ranking supports at most {1}")]
    TooManyNodes(usize, usize),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("all weights are zero for topic {0}")]
    ZeroTopicWeight(usize),
    #[error("candidate sets differ between simulated and observed placements")]
    CandidateMismatch,
    #[error("need at least {needed} distinct years, found {found}")]
    TooFewYears { needed: usize, found: usize },
    #[error("productivity weight is zero")]
    ZeroProductivityWeight,
    #[error("zero marginal in contingency table")]
    ZeroMarginal,
    #[error("infeasible synthetic spec: {0}")]
    InfeasibleSpec(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// Numerical failures are reported separately from data errors by the CLI.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_) | Error::ZeroProductivityWeight | Error::ZeroTopicWeight(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
