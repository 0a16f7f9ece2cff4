//! Contracts for the three model services (embedder, reranker, generator)
//! and their clients.
//!
//! Implementations provide the raw call (`embed_raw`, `score_candidates`,
//! `complete`); the provided trait methods enforce the engine-side contract:
//! batch bounds, L2 normalization, candidate-id bookkeeping and stable
//! tie-breaking.

mod cache;
mod hashing;
mod http;
mod limit;
mod mock;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ranking::{Granularity, RankedList};

pub use cache::{CachedEmbedder, EmbeddingCache};
pub use hashing::HashEmbedder;
pub use http::{Capabilities, HttpEmbedder, HttpGenerator, HttpReranker, HttpSettings};
pub use limit::{ConcurrencyLimit, Permit};
pub use mock::{
    CallCounter, CountingEmbedder, CountingGenerator, CountingReranker, EchoGenerator, FnGenerator,
    FnReranker, LexicalReranker,
};

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("provider unreachable after {attempts} attempt(s): {message}")]
    Unreachable { attempts: u32, message: String },
    #[error("provider returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed provider response: {0}")]
    Protocol(String),
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("provider returned {got} vectors for {expected} texts")]
    CountMismatch { expected: usize, got: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("batch of {size} exceeds provider limit {limit}")]
    BatchTooLarge { size: usize, limit: usize },
    #[error("rerank response is missing candidate {0:?}")]
    MissingCandidate(String),
    #[error("rerank response names unknown candidate {0:?}")]
    UnknownCandidate(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("empty completion")]
    EmptyCompletion,
    #[error("prompt exceeds provider context limit ({0})")]
    ContextOverflow(String),
    #[error("{0}")]
    Other(String),
}

impl ProviderError {
    /// Whether another attempt may succeed.
    pub fn is_transient(&self) -> bool {
        match self {
            ProviderError::Unreachable { .. } => true,
            ProviderError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// An L2-normalized embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f32>,
}

impl EmbeddingVector {
    /// Normalizes `values` to unit length. A zero vector stays zero.
    pub fn normalized(values: Vec<f32>) -> Self {
        let mut values = values;
        let norm = values
            .iter()
            .map(|v| f64::from(*v) * f64::from(*v))
            .sum::<f64>()
            .sqrt();
        if norm > 0.0 {
            for v in &mut values {
                *v = (f64::from(*v) / norm) as f32;
            }
        }
        Self { values }
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .map(|v| f64::from(*v) * f64::from(*v))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= 1e-6
    }

    /// Dot product; equals cosine similarity for normalized vectors.
    pub fn dot(&self, other: &EmbeddingVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| f64::from(*a) * f64::from(*b))
            .sum()
    }

    /// Element-wise mean of the inputs, re-normalized.
    pub fn mean(vectors: &[&EmbeddingVector]) -> Self {
        let dim = vectors.first().map_or(0, |v| v.dim());
        let mut acc = vec![0f64; dim];
        for v in vectors {
            for (a, x) in acc.iter_mut().zip(&v.values) {
                *a += f64::from(*x);
            }
        }
        let n = vectors.len().max(1) as f64;
        Self::normalized(acc.into_iter().map(|a| (a / n) as f32).collect())
    }
}

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;

    fn max_batch(&self) -> usize;

    /// One raw vector per text, in order. Need not be normalized.
    fn embed_raw(&self, texts: &[String], contextual: bool)
        -> Result<Vec<Vec<f32>>, ProviderError>;

    fn embed_batch(
        &self,
        texts: &[String],
        contextual: bool,
    ) -> Result<Vec<EmbeddingVector>, ProviderError> {
        if texts.is_empty() {
            return Err(ProviderError::EmptyBatch);
        }
        if texts.len() > self.max_batch() {
            return Err(ProviderError::BatchTooLarge {
                size: texts.len(),
                limit: self.max_batch(),
            });
        }
        let raw = self.embed_raw(texts, contextual)?;
        if raw.len() != texts.len() {
            return Err(ProviderError::CountMismatch {
                expected: texts.len(),
                got: raw.len(),
            });
        }
        let dim = self.dim();
        raw.into_iter()
            .map(|v| {
                if v.len() != dim {
                    Err(ProviderError::DimensionMismatch {
                        expected: dim,
                        got: v.len(),
                    })
                } else {
                    Ok(EmbeddingVector::normalized(v))
                }
            })
            .collect()
    }

    /// Embeds any number of texts in provider-sized batches.
    fn embed_all(
        &self,
        texts: &[String],
        contextual: bool,
    ) -> Result<Vec<EmbeddingVector>, ProviderError> {
        let mut out = Vec::with_capacity(texts.len());
        for batch in texts.chunks(self.max_batch().max(1)) {
            out.extend(self.embed_batch(batch, contextual)?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankCandidate {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankRequest {
    pub query: String,
    pub candidates: Vec<RerankCandidate>,
}

impl RerankRequest {
    pub fn new<I, A, B>(query: impl Into<String>, candidates: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        Self {
            query: query.into(),
            candidates: candidates
                .into_iter()
                .map(|(id, text)| RerankCandidate {
                    id: id.into(),
                    text: text.into(),
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.candidates.is_empty() {
            return Err(ProviderError::InvalidRequest(
                "rerank request has no candidates".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for c in &self.candidates {
            if !seen.insert(c.id.as_str()) {
                return Err(ProviderError::InvalidRequest(format!(
                    "duplicate candidate id {:?}",
                    c.id
                )));
            }
        }
        Ok(())
    }
}

pub trait Reranker: Send + Sync {
    /// Relevance score per candidate id, in any order.
    fn score_candidates(&self, req: &RerankRequest) -> Result<Vec<(String, f64)>, ProviderError>;

    /// Ranks exactly the request's candidates; ties break by ascending id.
    fn rerank(
        &self,
        req: &RerankRequest,
        granularity: Granularity,
    ) -> Result<RankedList, ProviderError> {
        req.validate()?;
        let scores = self.score_candidates(req)?;
        let mut by_id = std::collections::HashMap::with_capacity(scores.len());
        for (id, score) in scores {
            if !req.candidates.iter().any(|c| c.id == id) {
                return Err(ProviderError::UnknownCandidate(id));
            }
            by_id.insert(id, score);
        }
        let mut ranked = Vec::with_capacity(req.candidates.len());
        for c in &req.candidates {
            let score = by_id
                .get(&c.id)
                .copied()
                .ok_or_else(|| ProviderError::MissingCandidate(c.id.clone()))?;
            ranked.push((c.id.clone(), score));
        }
        Ok(RankedList::from_scores(ranked, granularity))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
}

impl GenRequest {
    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.prompt.is_empty() {
            return Err(ProviderError::InvalidRequest("empty prompt".into()));
        }
        if self.max_tokens == 0 {
            return Err(ProviderError::InvalidRequest(
                "max_tokens must be positive".into(),
            ));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(ProviderError::InvalidRequest(
                "temperature must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

pub trait Generator: Send + Sync {
    fn complete(&self, req: &GenRequest) -> Result<String, ProviderError>;

    /// Raw model text, unmodified. Empty completions are an error.
    fn generate(&self, req: &GenRequest) -> Result<String, ProviderError> {
        req.validate()?;
        let text = self.complete(req)?;
        if text.trim().is_empty() {
            return Err(ProviderError::EmptyCompletion);
        }
        Ok(text)
    }
}

/// Bounded retry with exponential backoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_backoff: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self {
            max_retries: 0,
            base_backoff: Duration::ZERO,
        }
    }

    /// Delay before retry number `retry` (0-based): base, 2·base, 4·base, …
    pub fn backoff(&self, retry: u32) -> Duration {
        self.base_backoff.saturating_mul(1u32 << retry.min(16))
    }

    /// Runs `op`, retrying transient failures up to `max_retries` times.
    pub fn run<T>(
        &self,
        mut op: impl FnMut() -> Result<T, ProviderError>,
    ) -> Result<T, ProviderError> {
        let mut retry = 0;
        loop {
            match op() {
                Ok(v) => return Ok(v),
                Err(e) if e.is_transient() && retry < self.max_retries => {
                    log::warn!(
                        "provider call failed ({e}); retry {} of {}",
                        retry + 1,
                        self.max_retries
                    );
                    std::thread::sleep(self.backoff(retry));
                    retry += 1;
                }
                Err(ProviderError::Unreachable { message, .. }) => {
                    return Err(ProviderError::Unreachable {
                        attempts: retry + 1,
                        message,
                    })
                }
                Err(e) => return Err(e),
            }
        }
    }
}

impl<T: Embedder + ?Sized> Embedder for std::sync::Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn max_batch(&self) -> usize {
        (**self).max_batch()
    }
    fn embed_raw(
        &self,
        texts: &[String],
        contextual: bool,
    ) -> Result<Vec<Vec<f32>>, ProviderError> {
        (**self).embed_raw(texts, contextual)
    }
}

impl<T: Reranker + ?Sized> Reranker for std::sync::Arc<T> {
    fn score_candidates(&self, req: &RerankRequest) -> Result<Vec<(String, f64)>, ProviderError> {
        (**self).score_candidates(req)
    }
}

impl<T: Generator + ?Sized> Generator for std::sync::Arc<T> {
    fn complete(&self, req: &GenRequest) -> Result<String, ProviderError> {
        (**self).complete(req)
    }
}
