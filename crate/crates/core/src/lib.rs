//! Dense-vector top-k retrieval on a plain inverted index.
//!
//! Vectors are turned into bags of synthetic terms by one of two encoders
//! ([`encoders`]), inverted into a compact postings index ([`index`]), and
//! searched with a tf-idf scorer ([`search`]). An exhaustive cosine search
//! serves as ground truth, [`eval`] computes TREC metrics, and [`bench`]
//! measures throughput and sweeps encoder parameters.

pub mod bench;
pub mod cli;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod index;
pub mod search;
pub mod vector;

pub use encoders::{EncoderConfig, Term, TermBag};
pub use error::{Error, Result};
pub use index::{build_index, index_stats, read_index, write_index, IndexStats, InvertedIndex};
pub use search::{exact_search, run_queries, score_query, ExactIndex, RankedList, ScoredDoc, Searcher};
pub use vector::{normalize, DenseVector, UnitVector};
