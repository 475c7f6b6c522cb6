//! Variable orderings as tours of a history-dependent TSP.
//!
//! Variables are cities. A virtual depot precedes the first variable and
//! follows the last, so an ordering is a closed tour rooted at the depot.
//! Visiting `X` after the set `S` costs `-max score(X | parents ⊆ S)`,
//! which makes the tour cost the negated best graph score consistent with
//! the ordering.

mod dp;
mod kopt;
mod oracle;
mod tsplib;

use std::fmt;

use crate::error::{Error, Result};

pub use dp::{exact_dp_ordering, MAX_DP_VARIABLES};
pub use kopt::{kopt_local_search, nearest_neighbor, KoptLevel, KoptOutcome, KoptParams, Move};
pub use oracle::{
    best_parent_score, CostOracle, OracleMode, DEFAULT_SUBSET_BUDGET, MAX_ORACLE_VARIABLES,
};
pub use tsplib::{
    export_tsplib, import_tour, parse_atsp, parse_tour, static_cost_matrix, write_atsp,
    write_tour, RescaledMatrix, StaticCostMatrix, DIAGONAL_WEIGHT, MAX_WEIGHT,
};

/// A permutation of `0..n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Ordering(Vec<usize>);

impl Ordering {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &v in &perm {
            if v >= n || std::mem::replace(&mut seen[v], true) {
                return Err(Error::InvalidOrdering(format!(
                    "{perm:?} is not a permutation of 0..{n}"
                )));
            }
        }
        Ok(Ordering(perm))
    }

    pub fn identity(n: usize) -> Self {
        Ordering((0..n).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `positions()[v]` is the index of variable `v` in the ordering.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.0.len()];
        for (i, &v) in self.0.iter().enumerate() {
            pos[v] = i;
        }
        pos
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

impl fmt::Display for Ordering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        f.write_str(&parts.join(" "))
    }
}
