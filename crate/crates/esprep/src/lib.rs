//! Corpus preparation toolkit for Spanish sequence-to-sequence pretraining:
//! streaming corpus I/O, quality filtering and language ID, exact + near
//! deduplication, BPE/unigram subword tokenizers, denoising objectives
//! (BART-style infilling, T5-style span corruption), task formatting, and
//! text-generation metrics.

pub mod clean;
pub mod corpus;
pub mod dedup;
pub mod error;
pub mod metrics;
pub mod noise;
pub mod pipeline;
pub mod taskprep;
pub mod tok;

pub use corpus::{read_corpus, read_corpus_vec, write_corpus, CorpusStats, Document};
pub use error::{Error, Result};
