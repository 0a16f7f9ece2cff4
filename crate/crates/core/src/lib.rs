//! Two-stage hybrid retrieval and grounded multiple-choice question
//! answering over page-structured document corpora.
//!
//! The pipeline routes each question to one document (dense + BM25 with a
//! reranker tie-break), retrieves the most relevant pages inside it (chunk
//! embeddings and BM25 fused with reciprocal rank fusion, then reranked),
//! and asks a generator for an answer letter plus a cited page. Model
//! inference sits behind the traits in [`providers`].

pub mod bm25;
pub mod chunking;
pub mod config;
pub mod corpus;
pub mod doc_router;
pub mod engine;
pub mod error;
pub mod evaluation;
pub mod fusion;
pub mod generation;
pub mod page_retriever;
pub mod par;
pub mod providers;
pub mod question;
pub mod ranking;
pub mod synth_qa;
pub mod text_prep;

pub use error::{Error, Result};
