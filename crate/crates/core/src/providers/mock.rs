//! In-process providers for hermetic runs and tests.

use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use super::{Embedder, GenRequest, Generator, ProviderError, RerankRequest, Reranker};
use crate::text_prep::TextPrep;

/// Shared call counter.
#[derive(Debug, Clone, Default)]
pub struct CallCounter(Arc<AtomicUsize>);

impl CallCounter {
    pub fn get(&self) -> usize {
        self.0.load(Ordering::SeqCst)
    }

    fn bump(&self) {
        self.0.fetch_add(1, Ordering::SeqCst);
    }
}

pub struct CountingEmbedder<E> {
    inner: E,
    calls: CallCounter,
}

impl<E: Embedder> CountingEmbedder<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            calls: CallCounter::default(),
        }
    }

    pub fn counter(&self) -> CallCounter {
        self.calls.clone()
    }
}

impl<E: Embedder> Embedder for CountingEmbedder<E> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn max_batch(&self) -> usize {
        self.inner.max_batch()
    }

    fn embed_raw(
        &self,
        texts: &[String],
        contextual: bool,
    ) -> Result<Vec<Vec<f32>>, ProviderError> {
        self.calls.bump();
        self.inner.embed_raw(texts, contextual)
    }
}

pub struct CountingReranker<R> {
    inner: R,
    calls: CallCounter,
}

impl<R: Reranker> CountingReranker<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            calls: CallCounter::default(),
        }
    }

    pub fn counter(&self) -> CallCounter {
        self.calls.clone()
    }
}

impl<R: Reranker> Reranker for CountingReranker<R> {
    fn score_candidates(&self, req: &RerankRequest) -> Result<Vec<(String, f64)>, ProviderError> {
        self.calls.bump();
        self.inner.score_candidates(req)
    }
}

pub struct CountingGenerator<G> {
    inner: G,
    calls: CallCounter,
}

impl<G: Generator> CountingGenerator<G> {
    pub fn new(inner: G) -> Self {
        Self {
            inner,
            calls: CallCounter::default(),
        }
    }

    pub fn counter(&self) -> CallCounter {
        self.calls.clone()
    }
}

impl<G: Generator> Generator for CountingGenerator<G> {
    fn complete(&self, req: &GenRequest) -> Result<String, ProviderError> {
        self.calls.bump();
        self.inner.complete(req)
    }
}

/// Reranker backed by a closure.
pub struct FnReranker<F>(F);

impl<F> FnReranker<F>
where
    F: Fn(&RerankRequest) -> Result<Vec<(String, f64)>, ProviderError> + Send + Sync,
{
    pub fn new(f: F) -> Self {
        Self(f)
    }
}

impl<F> Reranker for FnReranker<F>
where
    F: Fn(&RerankRequest) -> Result<Vec<(String, f64)>, ProviderError> + Send + Sync,
{
    fn score_candidates(&self, req: &RerankRequest) -> Result<Vec<(String, f64)>, ProviderError> {
        (self.0)(req)
    }
}

/// Deterministic reranker: score is the number of distinct query lemmas the
/// candidate contains.
#[derive(Debug, Clone, Default)]
pub struct LexicalReranker {
    prep: TextPrep,
}

impl LexicalReranker {
    pub fn new(prep: TextPrep) -> Self {
        Self { prep }
    }
}

impl Reranker for LexicalReranker {
    fn score_candidates(&self, req: &RerankRequest) -> Result<Vec<(String, f64)>, ProviderError> {
        let query: HashSet<String> = self.prep.preprocess(&req.query).into_iter().collect();
        Ok(req
            .candidates
            .iter()
            .map(|c| {
                let cand: HashSet<String> = self.prep.preprocess(&c.text).into_iter().collect();
                (c.id.clone(), query.intersection(&cand).count() as f64)
            })
            .collect())
    }
}

/// Returns a fixed completion.
#[derive(Debug, Clone)]
pub struct EchoGenerator {
    reply: String,
    context_limit: Option<usize>,
}

impl EchoGenerator {
    pub fn new(reply: impl Into<String>) -> Self {
        Self {
            reply: reply.into(),
            context_limit: None,
        }
    }

    /// Rejects prompts longer than `chars` characters.
    pub fn with_context_limit(mut self, chars: usize) -> Self {
        self.context_limit = Some(chars);
        self
    }
}

impl Generator for EchoGenerator {
    fn complete(&self, req: &GenRequest) -> Result<String, ProviderError> {
        if let Some(limit) = self.context_limit {
            let n = req.prompt.chars().count();
            if n > limit {
                return Err(ProviderError::ContextOverflow(format!(
                    "{n} > {limit} chars"
                )));
            }
        }
        Ok(self.reply.clone())
    }
}

/// Generator backed by a closure.
pub struct FnGenerator<F>(F);

impl<F> FnGenerator<F>
where
    F: Fn(&GenRequest) -> Result<String, ProviderError> + Send + Sync,
{
    pub fn new(f: F) -> Self {
        Self(f)
    }
}

impl<F> Generator for FnGenerator<F>
where
    F: Fn(&GenRequest) -> Result<String, ProviderError> + Send + Sync,
{
    fn complete(&self, req: &GenRequest) -> Result<String, ProviderError> {
        (self.0)(req)
    }
}
