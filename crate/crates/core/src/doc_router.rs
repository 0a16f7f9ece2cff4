//! Document-level routing.
//!
//! Each document is represented densely by an embedding of its first 300
//! characters and lexically by BM25 over its full preprocessed text. The
//! query is the question followed by its six options. When the dense and
//! sparse top hits agree, that document wins outright; otherwise the top two
//! of each ranking are pooled and a reranker picks among them, seeing each
//! document as its head plus its best BM25 snippet.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bm25::{Bm25Error, Bm25Index, Bm25Params};
use crate::corpus::{document_head, Corpus};
use crate::error::Error;
use crate::providers::{Embedder, EmbeddingVector, RerankRequest, Reranker};
use crate::question::Question;
use crate::ranking::{Granularity, RankedEntry, RankedList};
use crate::text_prep::TextPrep;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RouterConfig {
    pub head_chars: usize,
    pub snippet_chars: usize,
    pub top_k: usize,
    pub rerank_text_limit: usize,
}

impl Default for RouterConfig {
    fn default() -> Self {
        Self {
            head_chars: 300,
            snippet_chars: 300,
            top_k: 2,
            rerank_text_limit: 1024,
        }
    }
}

impl RouterConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.head_chars == 0
            || self.snippet_chars == 0
            || self.top_k == 0
            || self.rerank_text_limit == 0
        {
            return Err(Error::Config(format!(
                "router settings must be positive, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocEntry {
    pub head_text: String,
    pub head_vector: EmbeddingVector,
    pub raw_text: String,
}

/// Dense heads and a BM25 index over full document text, keyed by doc id.
#[derive(Debug, Clone)]
pub struct DocIndex {
    entries: BTreeMap<String, DocEntry>,
    bm25: Bm25Index,
}

impl DocIndex {
    pub fn build(
        corpus: &Corpus,
        embedder: &dyn Embedder,
        prep: &TextPrep,
        bm25: Bm25Params,
        config: &RouterConfig,
    ) -> Result<Self, Error> {
        config.validate()?;
        if corpus.is_empty() {
            return Err(Error::Invalid("cannot index an empty corpus".into()));
        }
        let docs: Vec<_> = corpus.documents().collect();
        let heads: Vec<String> = docs
            .iter()
            .map(|d| document_head(d, config.head_chars).map_err(Error::from))
            .collect::<Result<_, _>>()?;
        let mut vectors = Vec::with_capacity(docs.len());
        let batch = embedder.max_batch().max(1);
        for (i, texts) in heads.chunks(batch).enumerate() {
            let got = embedder
                .embed_batch(texts, false)
                .map_err(|e| Error::in_document(docs[i * batch].doc_id(), e.into()))?;
            vectors.extend(got);
        }
        let index = Bm25Index::build(
            docs.iter()
                .map(|d| (d.doc_id().to_owned(), prep.preprocess(&d.full_text()))),
            bm25,
        )
        .map_err(|e| Error::Invalid(e.to_string()))?;
        let entries = docs
            .iter()
            .zip(heads)
            .zip(vectors)
            .map(|((d, head_text), head_vector)| {
                (
                    d.doc_id().to_owned(),
                    DocEntry {
                        head_text,
                        head_vector,
                        raw_text: d.full_text(),
                    },
                )
            })
            .collect();
        Ok(Self {
            entries,
            bm25: index,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, doc_id: &str) -> Option<&DocEntry> {
        self.entries.get(doc_id)
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn bm25(&self) -> &Bm25Index {
        &self.bm25
    }

    /// Writes `doc_heads.json` and `doc_bm25.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), Error> {
        let heads: Vec<HeadRecord> = self
            .entries
            .iter()
            .map(|(id, e)| HeadRecord {
                doc_id: id.clone(),
                head_text: e.head_text.clone(),
                vector: e.head_vector.values().to_vec(),
            })
            .collect();
        let path = dir.join("doc_heads.json");
        let json = serde_json::to_vec(&heads).map_err(|e| Error::json("doc heads", e))?;
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        self.bm25
            .save(dir.join("doc_bm25.json"))
            .map_err(|e| Error::Invalid(e.to_string()))
    }

    /// Loads an index saved by [`DocIndex::save`]; raw texts come from the
    /// corpus, which must hold exactly the indexed documents.
    pub fn load(dir: &Path, corpus: &Corpus, bm25: Bm25Params) -> Result<Self, Error> {
        let path = dir.join("doc_heads.json");
        let raw = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let heads: Vec<HeadRecord> =
            serde_json::from_slice(&raw).map_err(|e| Error::json(path.display().to_string(), e))?;
        let index = Bm25Index::load(dir.join("doc_bm25.json"), Some(bm25))
            .map_err(|e| Error::Invalid(e.to_string()))?;
        if heads.len() != corpus.total_docs() {
            return Err(Error::Invalid(format!(
                "index holds {} documents but corpus has {}; rerun index",
                heads.len(),
                corpus.total_docs()
            )));
        }
        let mut entries = BTreeMap::new();
        for h in heads {
            let doc = corpus.get(&h.doc_id).ok_or_else(|| {
                Error::Invalid(format!("indexed document {:?} not in corpus", h.doc_id))
            })?;
            entries.insert(
                h.doc_id,
                DocEntry {
                    head_text: h.head_text,
                    head_vector: EmbeddingVector::normalized(h.vector),
                    raw_text: doc.full_text(),
                },
            );
        }
        Ok(Self {
            entries,
            bm25: index,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct HeadRecord {
    doc_id: String,
    head_text: String,
    vector: Vec<f32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoutePath {
    Agreement,
    Rerank,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingDecision {
    pub question_id: String,
    pub chosen_doc: String,
    pub path: RoutePath,
    /// Set when the sparse ranking was empty and the dense top hit was taken
    /// without reranking.
    pub degenerate: bool,
    pub dense_top: RankedList,
    pub sparse_top: RankedList,
    pub rerank_scores: Option<RankedList>,
}

/// One line of the routing audit log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingAudit {
    pub question_id: String,
    pub chosen_doc: String,
    pub path: RoutePath,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degenerate: bool,
    pub dense_top: Vec<RankedEntry>,
    pub sparse_top: Vec<RankedEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rerank_scores: Option<Vec<RankedEntry>>,
}

impl From<&RoutingDecision> for RoutingAudit {
    fn from(d: &RoutingDecision) -> Self {
        Self {
            question_id: d.question_id.clone(),
            chosen_doc: d.chosen_doc.clone(),
            path: d.path,
            degenerate: d.degenerate,
            dense_top: d.dense_top.entries().to_vec(),
            sparse_top: d.sparse_top.entries().to_vec(),
            rerank_scores: d.rerank_scores.as_ref().map(|r| r.entries().to_vec()),
        }
    }
}

/// Dense and sparse document rankings for a question.
pub fn rank_documents(
    question: &Question,
    index: &DocIndex,
    prep: &TextPrep,
    embedder: &dyn Embedder,
) -> Result<(RankedList, RankedList), Error> {
    let query_text = question.query_text();
    let qv = embedder
        .embed_batch(std::slice::from_ref(&query_text), false)?
        .pop()
        .ok_or_else(|| Error::Invalid("embedder returned no vector".into()))?;
    let dense = RankedList::from_scores(
        index
            .entries
            .iter()
            .map(|(id, e)| (id.clone(), qv.dot(&e.head_vector))),
        Granularity::Document,
    );
    let lemmas = prep.preprocess_query(&question.text, &question.options)?;
    let sparse = match index.bm25.score(&lemmas) {
        Ok(list) => list,
        Err(Bm25Error::EmptyQuery) => RankedList::empty(Granularity::Document),
        Err(e) => return Err(Error::Invalid(e.to_string())),
    };
    Ok((dense, sparse))
}

/// Reranker-side text for a document: head, newline, best snippet,
/// truncated to the configured limit.
pub fn rerank_text(
    index: &DocIndex,
    doc_id: &str,
    query_lemmas: &[String],
    prep: &TextPrep,
    config: &RouterConfig,
) -> Result<String, Error> {
    let entry = index
        .entry(doc_id)
        .ok_or_else(|| Error::Invalid(format!("unknown document {doc_id:?}")))?;
    let snippet = index
        .bm25
        .best_snippet(
            doc_id,
            query_lemmas,
            config.snippet_chars,
            &entry.raw_text,
            prep,
        )
        .map_err(|e| Error::Invalid(e.to_string()))?;
    let joined = format!("{}\n{}", entry.head_text, snippet);
    Ok(joined.chars().take(config.rerank_text_limit).collect())
}

pub fn route(
    question: &Question,
    index: &DocIndex,
    prep: &TextPrep,
    embedder: &dyn Embedder,
    reranker: &dyn Reranker,
    config: &RouterConfig,
) -> Result<RoutingDecision, Error> {
    let (dense, sparse) = rank_documents(question, index, prep, embedder)?;
    let lemmas = prep.preprocess_query(&question.text, &question.options)?;
    resolve_route(
        &question.question_id,
        &question.query_text(),
        &dense,
        &sparse,
        reranker,
        config.top_k,
        |id| rerank_text(index, id, &lemmas, prep, config),
    )
}

/// Applies the agreement rule to precomputed rankings. `represent` supplies
/// the reranker text of a candidate document.
pub fn resolve_route(
    question_id: &str,
    query_text: &str,
    dense: &RankedList,
    sparse: &RankedList,
    reranker: &dyn Reranker,
    top_k: usize,
    represent: impl Fn(&str) -> Result<String, Error>,
) -> Result<RoutingDecision, Error> {
    let dense_top = dense.truncated(top_k);
    let sparse_top = sparse.truncated(top_k);
    let dense_first = dense_top
        .first_id()
        .ok_or_else(|| Error::Invalid("dense ranking is empty".into()))?
        .to_owned();

    let decision = |chosen: String, path, degenerate, rerank_scores| RoutingDecision {
        question_id: question_id.to_owned(),
        chosen_doc: chosen,
        path,
        degenerate,
        dense_top: dense_top.clone(),
        sparse_top: sparse_top.clone(),
        rerank_scores,
    };

    let Some(sparse_first) = sparse_top.first_id() else {
        return Ok(decision(dense_first, RoutePath::Rerank, true, None));
    };
    if sparse_first == dense_first {
        return Ok(decision(dense_first, RoutePath::Agreement, false, None));
    }

    let mut candidates: Vec<&str> = Vec::new();
    for id in dense_top.ids().chain(sparse_top.ids()) {
        if !candidates.contains(&id) {
            candidates.push(id);
        }
    }
    let texts = candidates
        .iter()
        .map(|id| Ok((id.to_string(), represent(id)?)))
        .collect::<Result<Vec<_>, Error>>()?;
    let ranked = reranker.rerank(
        &RerankRequest::new(query_text, texts),
        Granularity::Document,
    )?;
    let chosen = ranked
        .first_id()
        .expect("reranker keeps every candidate")
        .to_owned();
    Ok(decision(chosen, RoutePath::Rerank, false, Some(ranked)))
}
