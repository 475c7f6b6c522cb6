use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("header mismatch: {0}")]
    HeaderMismatch(String),

    #[error("row {row}, column `{column}`: cannot parse `{value}` as {expected}")]
    BadCell {
        row: usize,
        column: String,
        value: String,
        expected: &'static str,
    },

    #[error("variable `{variable}` has no state labelled `{value}`")]
    UnknownState { variable: String, value: String },

    #[error("table still contains missing cells (row {0})")]
    MissingCells(usize),

    #[error("split test_count {test_count} must be in 1..{rows}")]
    SplitOutOfRange { test_count: usize, rows: usize },

    #[error("variable index {index} out of range for {n} variables")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("variable {0} cannot be its own parent")]
    SelfParent(usize),

    #[error("parent configuration count {0} exceeds the 2^31 limit")]
    ConfigOverflow(u128),

    #[error("node {node} has {found} parents, more than the in-degree bound {max}")]
    InDegree { node: usize, found: usize, max: usize },

    #[error("BIC needs at least one training row")]
    EmptyTable,

    #[error("exact parent search over {subsets} subsets exceeds the budget of {budget}")]
    SubsetBudget { subsets: u128, budget: u128 },

    #[error("{n} variables exceed the limit of {limit} for {what}")]
    TooManyVariables {
        n: usize,
        limit: usize,
        what: &'static str,
    },

    #[error("invalid ordering: {0}")]
    InvalidOrdering(String),

    #[error("graph is not acyclic")]
    Cyclic,

    #[error("malformed TSPLIB data: {0}")]
    Tsplib(String),

    #[error("malformed network file: {0}")]
    NetworkFormat(String),

    #[error("evidence has zero probability under the network")]
    ZeroEvidence,

    #[error("invalid query: {0}")]
    Query(String),

    #[error("score cache file: {0}")]
    CacheFormat(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
