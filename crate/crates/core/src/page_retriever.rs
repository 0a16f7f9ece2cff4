//! Page-level retrieval inside the routed document.
//!
//! Chunks are embedded in overlapping contextual windows (5 chunks, stride
//! 3) and chunks seen by two windows get the re-normalized mean of both
//! vectors. At query time a dense ranking (question vector against chunk
//! vectors) and a BM25 ranking are fused with RRF, the top fused chunks are
//! reranked by a cross-encoder, and the first distinct pages in reranker
//! order are returned.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bm25::{Bm25Error, Bm25Index, Bm25Params};
use crate::chunking::{chunk_document, Chunk, ChunkingConfig};
use crate::corpus::Document;
use crate::error::Error;
use crate::fusion::{rrf_fuse, DEFAULT_RRF_K};
use crate::par::{self, Execution};
use crate::providers::{Embedder, EmbeddingVector, ProviderError, RerankRequest, Reranker};
use crate::question::Question;
use crate::ranking::{Granularity, RankedList};
use crate::text_prep::TextPrep;

pub const DEFAULT_WINDOW: usize = 5;
pub const DEFAULT_WINDOW_OVERLAP: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    pub rrf_k: u32,
    pub rerank_top_n: usize,
    pub pages_out: usize,
    /// Include answer options in the page-level BM25 query.
    pub sparse_query_with_options: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            rrf_k: DEFAULT_RRF_K,
            rerank_top_n: 8,
            pages_out: 3,
            sparse_query_with_options: false,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.rrf_k == 0 || self.pages_out == 0 || self.rerank_top_n < self.pages_out {
            return Err(Error::Config(format!(
                "fusion config needs rrf_k > 0 and rerank_top_n >= pages_out >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Contextual batching schedule for chunk embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub size: usize,
    pub overlap: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            size: DEFAULT_WINDOW,
            overlap: DEFAULT_WINDOW_OVERLAP,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.size == 0 || self.overlap * 2 > self.size || self.overlap >= self.size {
            return Err(Error::Config(format!(
                "window overlap must be at most half the window size, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn stride(&self) -> usize {
        self.size - self.overlap
    }
}

/// Windows of `size` consecutive chunks starting every `stride` chunks; the
/// last window ends at `n` and may be shorter.
pub fn window_schedule(n: usize, config: WindowConfig) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let mut start = 0;
    loop {
        let end = (start + config.size).min(n);
        out.push(start..end);
        if end == n {
            return out;
        }
        start += config.stride();
    }
}

/// Embeds chunks in document order through contextual windows. Windows may
/// run concurrently; results merge by window index.
pub fn embed_chunks(
    chunks: &mut [Chunk],
    embedder: &dyn Embedder,
    window: WindowConfig,
    exec: Execution,
) -> Result<(), Error> {
    window.validate()?;
    let window = WindowConfig {
        size: window.size.min(embedder.max_batch()).max(1),
        overlap: window
            .overlap
            .min(embedder.max_batch().saturating_sub(1) / 2),
    };
    let schedule = window_schedule(chunks.len(), window);
    let texts: Vec<String> = chunks.iter().map(|c| c.text.clone()).collect();
    let results = par::map_indexed(exec, &schedule, |w, range| {
        embedder
            .embed_batch(&texts[range.clone()], true)
            .map_err(|source| Error::EmbedWindow { window: w, source })
    });
    let mut per_chunk: Vec<Vec<EmbeddingVector>> = vec![Vec::new(); chunks.len()];
    for (range, result) in schedule.iter().zip(results) {
        for (i, v) in range.clone().zip(result?) {
            per_chunk[i].push(v);
        }
    }
    for (chunk, vectors) in chunks.iter_mut().zip(per_chunk) {
        let refs: Vec<&EmbeddingVector> = vectors.iter().collect();
        chunk.embedding = Some(if refs.len() == 1 {
            vectors.into_iter().next().expect("one vector")
        } else {
            EmbeddingVector::mean(&refs)
        });
    }
    Ok(())
}

/// A document's chunks, their embeddings, and a BM25 index over them.
#[derive(Debug, Clone)]
pub struct DocChunks {
    pub doc_id: String,
    pub chunks: Vec<Chunk>,
    pub bm25: Bm25Index,
    position: HashMap<String, usize>,
}

impl DocChunks {
    /// Chunks without embeddings yet. Fails for documents with no text.
    pub fn build_unembedded(
        doc: &Document,
        chunking: &ChunkingConfig,
        prep: &TextPrep,
        bm25: Bm25Params,
    ) -> Result<Self, Error> {
        let chunks = chunk_document(doc, chunking)?;
        Self::from_chunks(doc.doc_id(), chunks, prep, bm25)
    }

    pub fn from_chunks(
        doc_id: &str,
        chunks: Vec<Chunk>,
        prep: &TextPrep,
        bm25: Bm25Params,
    ) -> Result<Self, Error> {
        if chunks.is_empty() {
            return Err(Error::Invalid(format!("document {doc_id:?} has no chunks")));
        }
        let index = Bm25Index::build(
            chunks
                .iter()
                .map(|c| (c.chunk_id.clone(), prep.preprocess(&c.text))),
            bm25,
        )
        .map_err(|e| Error::Invalid(format!("document {doc_id:?}: {e}")))?;
        let position = chunks
            .iter()
            .enumerate()
            .map(|(i, c)| (c.chunk_id.clone(), i))
            .collect();
        Ok(Self {
            doc_id: doc_id.to_owned(),
            chunks,
            bm25: index,
            position,
        })
    }

    pub fn chunk(&self, chunk_id: &str) -> Option<&Chunk> {
        self.position.get(chunk_id).map(|&i| &self.chunks[i])
    }

    pub fn is_embedded(&self) -> bool {
        self.chunks.iter().all(|c| c.embedding.is_some())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedPage {
    pub page_number: u32,
    /// Reranked chunk ids on this page, best first.
    pub chunk_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageRetrieval {
    pub doc_id: String,
    pub pages: Vec<RetrievedPage>,
    pub dense: RankedList,
    pub sparse: RankedList,
    pub fused: RankedList,
    pub reranked: RankedList,
}

impl PageRetrieval {
    pub fn page_numbers(&self) -> Vec<u32> {
        self.pages.iter().map(|p| p.page_number).collect()
    }
}

pub fn retrieve_pages(
    question: &Question,
    doc_chunks: &DocChunks,
    prep: &TextPrep,
    embedder: &dyn Embedder,
    reranker: &dyn Reranker,
    fusion: &FusionConfig,
) -> Result<PageRetrieval, Error> {
    fusion.validate()?;
    if !doc_chunks.is_embedded() {
        return Err(Error::Invalid(format!(
            "chunks of {:?} are not embedded",
            doc_chunks.doc_id
        )));
    }
    let query_vec = embedder
        .embed_batch(std::slice::from_ref(&question.text), false)?
        .pop()
        .ok_or(ProviderError::CountMismatch {
            expected: 1,
            got: 0,
        })?;
    let dense = RankedList::from_scores(
        doc_chunks.chunks.iter().map(|c| {
            let v = c.embedding.as_ref().expect("checked above");
            (c.chunk_id.clone(), query_vec.dot(v))
        }),
        Granularity::Chunk,
    );

    let lemmas = if fusion.sparse_query_with_options {
        prep.preprocess(&question.query_text())
    } else {
        prep.preprocess(&question.text)
    };
    let sparse = match doc_chunks.bm25.score_as(&lemmas, Granularity::Chunk) {
        Ok(list) => list,
        Err(Bm25Error::EmptyQuery) => RankedList::empty(Granularity::Chunk),
        Err(e) => return Err(Error::Invalid(e.to_string())),
    };

    let fused = rrf_fuse(&dense, &sparse, fusion.rrf_k);
    let top = fused.truncated(fusion.rerank_top_n);
    let request = RerankRequest::new(
        question.text.clone(),
        top.ids().map(|id| {
            let chunk = doc_chunks
                .chunk(id)
                .expect("fused ids come from this document");
            (id.to_owned(), chunk.text.clone())
        }),
    );
    let reranked = reranker.rerank(&request, Granularity::Chunk)?;
    let pages = pages_in_order(
        reranked.ids().map(|id| {
            (
                doc_chunks
                    .chunk(id)
                    .expect("reranked ids come from this document")
                    .page_number,
                id,
            )
        }),
        fusion.pages_out,
    );
    Ok(PageRetrieval {
        doc_id: doc_chunks.doc_id.clone(),
        pages,
        dense,
        sparse,
        fused,
        reranked,
    })
}

/// First `limit` distinct pages in order of appearance, each with all its
/// chunk ids in that order.
pub fn pages_in_order<'a>(
    ranked: impl Iterator<Item = (u32, &'a str)>,
    limit: usize,
) -> Vec<RetrievedPage> {
    let mut pages: Vec<RetrievedPage> = Vec::new();
    for (page_number, id) in ranked {
        if let Some(p) = pages.iter_mut().find(|p| p.page_number == page_number) {
            p.chunk_ids.push(id.to_owned());
        } else if pages.len() < limit {
            pages.push(RetrievedPage {
                page_number,
                chunk_ids: vec![id.to_owned()],
            });
        }
    }
    pages
}

#[derive(Serialize, Deserialize)]
struct ChunkLine {
    chunk_id: String,
    doc_id: String,
    page_number: u32,
    span: [usize; 2],
    text: String,
}

const VECTOR_MAGIC: &[u8; 8] = b"HQAVEC01";

/// Writes chunks as JSONL plus a binary vector sidecar.
///
/// Sidecar layout (little endian): magic `HQAVEC01`, `dim: u32`,
/// `count: u32`, then per chunk `id_len: u32`, id bytes, `dim` × `f32`.
pub fn save_chunk_store(chunks: &[Chunk], jsonl: &Path, vectors: &Path) -> Result<(), Error> {
    crate::question::write_jsonl(
        jsonl,
        chunks.iter().map(|c| ChunkLine {
            chunk_id: c.chunk_id.clone(),
            doc_id: c.doc_id.clone(),
            page_number: c.page_number,
            span: [c.span.0, c.span.1],
            text: c.text.clone(),
        }),
    )?;
    let dim = chunks
        .iter()
        .find_map(|c| c.embedding.as_ref().map(EmbeddingVector::dim))
        .unwrap_or(0);
    let embedded: Vec<&Chunk> = chunks.iter().filter(|c| c.embedding.is_some()).collect();
    let file = fs::File::create(vectors).map_err(|e| Error::io(vectors, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(vectors, e);
    w.write_all(VECTOR_MAGIC).map_err(io)?;
    w.write_all(&(dim as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&(embedded.len() as u32).to_le_bytes())
        .map_err(io)?;
    for c in embedded {
        let v = c.embedding.as_ref().expect("filtered");
        if v.dim() != dim {
            return Err(Error::Invalid(format!(
                "chunk {} has dim {} != {dim}",
                c.chunk_id,
                v.dim()
            )));
        }
        w.write_all(&(c.chunk_id.len() as u32).to_le_bytes())
            .map_err(io)?;
        w.write_all(c.chunk_id.as_bytes()).map_err(io)?;
        for x in v.values() {
            w.write_all(&x.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn load_chunk_store(jsonl: &Path, vectors: &Path) -> Result<Vec<Chunk>, Error> {
    let lines: Vec<ChunkLine> = crate::question::read_jsonl(jsonl)?;
    let mut raw = Vec::new();
    fs::File::open(vectors)
        .and_then(|mut f| f.read_to_end(&mut raw))
        .map_err(|e| Error::io(vectors, e))?;
    let bad = |m: &str| Error::Invalid(format!("{}: {m}", vectors.display()));
    let mut cur = raw.as_slice();
    let mut take = |n: usize| -> Result<&[u8], Error> {
        if cur.len() < n {
            return Err(bad("truncated vector file"));
        }
        let (head, tail) = cur.split_at(n);
        cur = tail;
        Ok(head)
    };
    if take(8)? != VECTOR_MAGIC {
        return Err(bad("bad magic"));
    }
    let read_u32 = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize;
    let dim = read_u32(take(4)?);
    let count = read_u32(take(4)?);
    let mut vectors_by_id = HashMap::with_capacity(count);
    for _ in 0..count {
        let id_len = read_u32(take(4)?);
        let id =
            String::from_utf8(take(id_len)?.to_vec()).map_err(|_| bad("chunk id is not UTF-8"))?;
        let bytes = take(dim * 4)?;
        let values: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        vectors_by_id.insert(id, EmbeddingVector::normalized(values));
    }
    Ok(lines
        .into_iter()
        .map(|l| {
            let ordinal = l
                .chunk_id
                .rsplit_once("#c")
                .and_then(|(_, o)| o.parse().ok())
                .unwrap_or(0);
            Chunk {
                embedding: vectors_by_id.remove(&l.chunk_id),
                chunk_id: l.chunk_id,
                doc_id: l.doc_id,
                page_number: l.page_number,
                ordinal,
                span: (l.span[0], l.span[1]),
                text: l.text,
            }
        })
        .collect())
}
