//! Long-chain XOR refutation toolkit for 3-query locally correctable codes.
//!
//! The pipeline runs from normal-form correction matchings to chain
//! hypergraphs, a contiguously regular decomposition, bipartite XOR formulas,
//! Kikuchi operators, row pruning, and a numeric certificate bounding the
//! dimension of any linear code consistent with the matchings.

pub mod chains;
pub mod cli;
pub mod combinatorics;
pub mod concentration;
pub mod error;
pub mod formulas;
pub mod instances;
pub mod kikuchi;
pub mod matching;
pub mod partition;
pub mod pruning;
pub mod seed;
pub mod spectral;

pub use error::{Error, Result};

/// Crate version embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
