//! Okapi BM25 over preprocessed lemma sequences.
//!
//! Term weight for lemma `t` in item `d`:
//!
//! ```text
//! idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * |d| / avgdl))
//! idf(t) = ln((N - n(t) + 0.5) / (n(t) + 0.5) + 1)
//! ```
//!
//! Query lemmas are summed with multiplicity.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ranking::{Granularity, RankedList};
use crate::text_prep::TextPrep;

pub const DEFAULT_K1: f64 = 1.5;
pub const DEFAULT_B: f64 = 0.75;

const FORMAT_NAME: &str = "hybridqa-bm25";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum Bm25Error {
    #[error("duplicate item id {0:?}")]
    DuplicateItem(String),
    #[error("cannot build an index over zero items")]
    NoItems,
    #[error("invalid BM25 parameters k1={k1}, b={b}")]
    InvalidParams { k1: f64, b: f64 },
    #[error("unknown item {0:?}")]
    UnknownItem(String),
    #[error("empty query")]
    EmptyQuery,
    #[error("index file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self {
            k1: DEFAULT_K1,
            b: DEFAULT_B,
        }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<(), Bm25Error> {
        if self.k1 > 0.0 && self.k1.is_finite() && (0.0..=1.0).contains(&self.b) {
            Ok(())
        } else {
            Err(Bm25Error::InvalidParams {
                k1: self.k1,
                b: self.b,
            })
        }
    }
}

#[derive(Debug, Clone)]
pub struct Bm25Index {
    ids: Vec<String>,
    lemmas: Vec<Vec<String>>,
    lengths: Vec<usize>,
    position: HashMap<String, usize>,
    // lemma -> (item index, term frequency), item indices ascending
    postings: HashMap<String, Vec<(usize, u32)>>,
    avg_len: f64,
    params: Bm25Params,
}

impl Bm25Index {
    pub fn build<I, S>(items: I, params: Bm25Params) -> Result<Self, Bm25Error>
    where
        I: IntoIterator<Item = (S, Vec<String>)>,
        S: Into<String>,
    {
        params.validate()?;
        let mut ids = Vec::new();
        let mut lemmas = Vec::new();
        let mut position = HashMap::new();
        for (id, item_lemmas) in items {
            let id = id.into();
            if position.insert(id.clone(), ids.len()).is_some() {
                return Err(Bm25Error::DuplicateItem(id));
            }
            ids.push(id);
            lemmas.push(item_lemmas);
        }
        if ids.is_empty() {
            return Err(Bm25Error::NoItems);
        }
        let mut postings: HashMap<String, Vec<(usize, u32)>> = HashMap::new();
        for (idx, item) in lemmas.iter().enumerate() {
            let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
            for l in item {
                *tf.entry(l.as_str()).or_default() += 1;
            }
            for (lemma, count) in tf {
                postings
                    .entry(lemma.to_owned())
                    .or_default()
                    .push((idx, count));
            }
        }
        let lengths: Vec<usize> = lemmas.iter().map(Vec::len).collect();
        let avg_len = lengths.iter().sum::<usize>() as f64 / ids.len() as f64;
        Ok(Self {
            ids,
            lemmas,
            lengths,
            position,
            postings,
            avg_len,
            params,
        })
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn avg_len(&self) -> f64 {
        self.avg_len
    }

    pub fn doc_freq(&self, lemma: &str) -> usize {
        self.postings.get(lemma).map_or(0, Vec::len)
    }

    pub fn contains(&self, item_id: &str) -> bool {
        self.position.contains_key(item_id)
    }

    pub fn item_ids(&self) -> &[String] {
        &self.ids
    }

    pub fn item_len(&self, item_id: &str) -> Option<usize> {
        self.position.get(item_id).map(|&i| self.lengths[i])
    }

    pub fn idf(&self, lemma: &str) -> f64 {
        let n = self.doc_freq(lemma) as f64;
        let total = self.ids.len() as f64;
        ((total - n + 0.5) / (n + 0.5) + 1.0).ln()
    }

    fn length_norm(&self, item_len: usize) -> f64 {
        let Bm25Params { k1, b } = self.params;
        // avg_len is zero only when every item is empty, in which case no
        // term can match.
        let rel = if self.avg_len > 0.0 {
            item_len as f64 / self.avg_len
        } else {
            0.0
        };
        k1 * (1.0 - b + b * rel)
    }

    fn term_weight(&self, idf: f64, tf: f64, item_len: usize) -> f64 {
        idf * tf * (self.params.k1 + 1.0) / (tf + self.length_norm(item_len))
    }

    /// Scores every item containing at least one query lemma. Items with no
    /// matching lemma are omitted.
    pub fn score(&self, query: &[String]) -> Result<RankedList, Bm25Error> {
        self.score_as(query, Granularity::Document)
    }

    pub fn score_as(
        &self,
        query: &[String],
        granularity: Granularity,
    ) -> Result<RankedList, Bm25Error> {
        if query.is_empty() {
            return Err(Bm25Error::EmptyQuery);
        }
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for lemma in query {
            let Some(posting) = self.postings.get(lemma) else {
                continue;
            };
            let idf = self.idf(lemma);
            for &(idx, tf) in posting {
                *acc.entry(idx).or_default() +=
                    self.term_weight(idf, f64::from(tf), self.lengths[idx]);
            }
        }
        Ok(RankedList::from_scores(
            acc.into_iter().map(|(idx, s)| (self.ids[idx].clone(), s)),
            granularity,
        ))
    }

    /// Character span `[start, end)` of the best-scoring window of
    /// `source_text`; see [`Bm25Index::best_snippet`].
    pub fn best_snippet_span(
        &self,
        item_id: &str,
        query: &[String],
        window_chars: usize,
        source_text: &str,
        prep: &TextPrep,
    ) -> Result<(usize, usize), Bm25Error> {
        let &idx = self
            .position
            .get(item_id)
            .ok_or_else(|| Bm25Error::UnknownItem(item_id.to_owned()))?;
        let text_len = source_text.chars().count();
        if window_chars >= text_len {
            return Ok((0, text_len));
        }
        let mut multiplicity: HashMap<&str, usize> = HashMap::new();
        for l in query {
            *multiplicity.entry(l.as_str()).or_default() += 1;
        }
        let occurrences: Vec<_> = prep
            .lemma_spans(source_text)
            .into_iter()
            .filter(|s| {
                multiplicity.contains_key(s.lemma.as_str()) && s.end - s.start <= window_chars
            })
            .collect();
        if occurrences.is_empty() {
            return Ok((0, window_chars));
        }
        let item_len = self.lengths[idx];
        let window_score = |lo: usize, hi: usize| -> f64 {
            let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
            for occ in &occurrences[lo..hi] {
                *tf.entry(occ.lemma.as_str()).or_default() += 1;
            }
            tf.into_iter()
                .map(|(l, c)| {
                    multiplicity[l] as f64 * self.term_weight(self.idf(l), f64::from(c), item_len)
                })
                .sum()
        };

        // The best window can always be shifted to start at an occurrence
        // start or end at an occurrence end without losing score.
        let max_start = text_len - window_chars;
        let mut starts: Vec<usize> = occurrences
            .iter()
            .flat_map(|o| [o.start.min(max_start), o.end.saturating_sub(window_chars)])
            .collect();
        starts.sort_unstable();
        starts.dedup();

        let included = |s: usize| -> (usize, usize) {
            let lo = occurrences.partition_point(|o| o.start < s);
            let hi = occurrences.partition_point(|o| o.end <= s + window_chars);
            (lo, hi.max(lo))
        };
        let mut best: Option<(f64, usize, usize)> = None;
        for &s in &starts {
            let (lo, hi) = included(s);
            if lo == hi {
                continue;
            }
            let score = window_score(lo, hi);
            if best.is_none_or(|(b, _, _)| score > b + 1e-12) {
                best = Some((score, lo, hi));
            }
        }
        let Some((_, lo, hi)) = best else {
            return Ok((0, window_chars));
        };
        // Center the window on the occurrences it covers, staying inside the
        // range of starts that keeps them covered.
        let first = occurrences[lo].start;
        let last = occurrences[hi - 1].end;
        let ideal = ((first + last) / 2).saturating_sub(window_chars / 2);
        let lower = last.saturating_sub(window_chars);
        let upper = first.min(max_start);
        let start = ideal.clamp(lower, upper.max(lower));
        Ok((start, start + window_chars))
    }

    /// The `window_chars`-long span of `source_text` whose query-lemma
    /// occurrences carry the highest summed BM25 term weight, centered on
    /// those occurrences. Falls back to the first window when no query
    /// lemma occurs.
    pub fn best_snippet(
        &self,
        item_id: &str,
        query: &[String],
        window_chars: usize,
        source_text: &str,
        prep: &TextPrep,
    ) -> Result<String, Bm25Error> {
        let (start, end) =
            self.best_snippet_span(item_id, query, window_chars, source_text, prep)?;
        Ok(source_text.chars().skip(start).take(end - start).collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), Bm25Error> {
        let file = IndexFile {
            format: FORMAT_NAME.to_owned(),
            version: FORMAT_VERSION,
            k1: self.params.k1,
            b: self.params.b,
            items: self
                .ids
                .iter()
                .zip(&self.lemmas)
                .map(|(id, lemmas)| IndexItem {
                    id: id.clone(),
                    lemmas: lemmas.clone(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&file).map_err(|e| Bm25Error::Format(e.to_string()))?;
        fs::write(path.as_ref(), json)
            .map_err(|e| Bm25Error::Format(format!("{}: {e}", path.as_ref().display())))
    }

    /// Loads a saved index. When `expected` is given, the recorded
    /// parameters must match it exactly.
    pub fn load(path: impl AsRef<Path>, expected: Option<Bm25Params>) -> Result<Self, Bm25Error> {
        let raw = fs::read(path.as_ref())
            .map_err(|e| Bm25Error::Format(format!("{}: {e}", path.as_ref().display())))?;
        let file: IndexFile =
            serde_json::from_slice(&raw).map_err(|e| Bm25Error::Format(e.to_string()))?;
        if file.format != FORMAT_NAME || file.version != FORMAT_VERSION {
            return Err(Bm25Error::Format(format!(
                "unsupported format {} v{}",
                file.format, file.version
            )));
        }
        let params = Bm25Params {
            k1: file.k1,
            b: file.b,
        };
        if let Some(exp) = expected {
            if exp != params {
                return Err(Bm25Error::Format(format!(
                    "index built with k1={} b={}, configured k1={} b={}",
                    params.k1, params.b, exp.k1, exp.b
                )));
            }
        }
        Self::build(file.items.into_iter().map(|i| (i.id, i.lemmas)), params)
    }
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    format: String,
    version: u32,
    k1: f64,
    b: f64,
    items: Vec<IndexItem>,
}

#[derive(Serialize, Deserialize)]
struct IndexItem {
    id: String,
    lemmas: Vec<String>,
}

/// Distinct query lemmas, in first-seen order.
pub fn distinct_lemmas(query: &[String]) -> Vec<&str> {
    let mut seen = HashSet::new();
    query
        .iter()
        .map(String::as_str)
        .filter(|l| seen.insert(*l))
        .collect()
}
