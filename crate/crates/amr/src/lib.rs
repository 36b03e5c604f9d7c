//! Penman AMR parsing, graph comparison with a relaxed treatment of
//! non-argument edges, and the inference-type annotation cascade over
//! (premise, premise, conclusion) triples.

pub mod classify;
pub mod graph;
pub mod penman;

pub use classify::{classify, most_similar_premise, one_word_diff, InferenceType, Premise, Triple};
pub use graph::{graph_equal, relaxed_subset, AmrEdge, AmrGraph, AmrTarget};
pub use penman::parse_penman;

use thiserror::Error;

#[derive(Error, Debug)]
pub enum AmrError {
    #[error("penman parse error: {0}")]
    Parse(String),
    #[error("unbalanced parentheses at position {0}")]
    Unbalanced(usize),
    #[error("duplicate concept binding for variable {0:?}")]
    DuplicateBinding(String),
    #[error("dangling reference {0:?} (unquoted targets must name a bound variable)")]
    DanglingReference(String),
    #[error("subgraph search exceeded {0} states")]
    SearchCapExceeded(usize),
}

pub type Result<T> = std::result::Result<T, AmrError>;
