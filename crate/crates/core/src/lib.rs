//! Multi-language code localization.
//!
//! The crate builds a typed dependency graph over Python, C++ and QML
//! sources, indexes code units for BM25 search, retrieves similar historical
//! issues through filtered cosine search, and combines those signals into a
//! ranked list of candidate fix files. The evaluation side scores retrieval
//! with a hierarchical path similarity and localization with Acc@k.

pub mod config;
pub mod domain;
pub mod error;
pub mod eval;
pub mod graph;
pub mod index;
pub mod localize;
pub mod parsers;
pub mod sic;
pub mod similarity;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/paths.md")]
    mod paths {}
    #[doc = include_str!("../../../book/src/graph.md")]
    mod graph {}
    #[doc = include_str!("../../../book/src/code-search.md")]
    mod code_search {}
    #[doc = include_str!("../../../book/src/similar-issues.md")]
    mod similar_issues {}
    #[doc = include_str!("../../../book/src/path-similarity.md")]
    mod path_similarity {}
    #[doc = include_str!("../../../book/src/localization.md")]
    mod localization {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
}
