//! Structure learning for discrete Bayesian networks through variable
//! orderings found by a history-dependent traveling salesman search.
//!
//! The pipeline: [`dataset`] turns CSV data into a [`DiscreteTable`],
//! [`hdtsp`] finds a low-cost ordering under a decomposable [`scoring`]
//! metric, [`structure`] picks parents consistent with that ordering, and
//! [`inference`] fits and evaluates the resulting network.

pub mod dataset;
pub mod error;
pub mod hdtsp;
pub mod inference;
pub mod scoring;
pub mod structure;
pub mod synthetic;

pub use dataset::{DiscreteTable, Schema, SplitSpec};
pub use error::{Error, Result};
pub use hdtsp::{CostOracle, Ordering, OracleMode};
pub use inference::CptSet;
pub use scoring::{Metric, ParentSet, ScoreCache, Scorer};
pub use structure::{Dag, Network};
