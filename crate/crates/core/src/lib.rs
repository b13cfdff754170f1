//! Corpus analytics for online course reviews.
//!
//! The crate ingests review collections, preprocesses text into lemma
//! documents, scores sentiment with two lexicon engines, trains
//! collapsed-Gibbs LDA models over two projected vocabularies, evaluates
//! them with C_umass / C_v coherence, runs rating and group statistics,
//! and assembles per-course characterization reports. Every stage is
//! deterministic for a fixed seed and persists plain JSONL/CSV artifacts.

pub mod characterize;
pub mod coherence;
pub mod corpus;
pub mod error;
pub mod lda;
pub mod pipeline;
pub mod rng;
pub mod sentiment;
pub mod stats;
pub mod synth;
pub mod textprep;

pub use error::{Error, Result};
