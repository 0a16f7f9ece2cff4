//! Lexical preprocessing shared by queries and corpus text.
//!
//! Text is split on Unicode word boundaries, lowercased, lemmatized through a
//! pluggable [`Lemmatizer`], then filtered for stopwords, short tokens and
//! artifact patterns. Only the sparse (BM25) side of retrieval uses it.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use regex::Regex;
use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

use crate::error::Error;

/// Maps a lowercased surface form to its dictionary form.
///
/// Implementations are called concurrently from worker threads.
pub trait Lemmatizer: Send + Sync {
    fn lemma(&self, lowercase_surface: &str) -> String;
}

/// Returns the surface form unchanged.
#[derive(Debug, Default, Clone, Copy)]
pub struct IdentityLemmatizer;

impl Lemmatizer for IdentityLemmatizer {
    fn lemma(&self, lowercase_surface: &str) -> String {
        lowercase_surface.to_owned()
    }
}

/// Exact-match dictionary lemmatizer with identity fallback.
#[derive(Debug, Default, Clone)]
pub struct LookupLemmatizer {
    table: HashMap<String, String>,
}

impl LookupLemmatizer {
    pub fn new<I, K, V>(entries: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let table = entries
            .into_iter()
            .map(|(k, v)| (k.as_ref().to_lowercase(), v.as_ref().to_lowercase()))
            .collect();
        Self { table }
    }

    /// Reads a tab-separated `surface<TAB>lemma` file. `#` starts a comment.
    pub fn from_tsv(path: impl AsRef<Path>) -> Result<Self, Error> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (i, line) in raw.lines().enumerate() {
            let line = strip_comment(line);
            if line.is_empty() {
                continue;
            }
            let (surface, lemma) = line.split_once('\t').ok_or_else(|| {
                Error::Config(format!(
                    "{}:{}: expected surface<TAB>lemma",
                    path.display(),
                    i + 1
                ))
            })?;
            entries.push((surface.trim().to_owned(), lemma.trim().to_owned()));
        }
        Ok(Self::new(entries))
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl Lemmatizer for LookupLemmatizer {
    fn lemma(&self, lowercase_surface: &str) -> String {
        self.table
            .get(lowercase_surface)
            .cloned()
            .unwrap_or_else(|| lowercase_surface.to_owned())
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => line[..i].trim(),
        None => line.trim(),
    }
}

/// Default artifact filters: punctuation/symbol runs and markdown residue.
pub const DEFAULT_ARTIFACT_PATTERNS: &[&str] =
    &[r"^[\p{P}\p{S}]+$", r"^_+$", r"^(br|nbsp|amp|lt|gt)$"];

/// Serializable form of [`NormalizerConfig`], as found in the engine config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalizerSettings {
    pub stopwords: Vec<String>,
    pub stopwords_file: Option<String>,
    pub lemma_file: Option<String>,
    pub min_token_len: usize,
    pub artifact_patterns: Vec<String>,
}

impl Default for NormalizerSettings {
    fn default() -> Self {
        Self {
            stopwords: Vec::new(),
            stopwords_file: None,
            lemma_file: None,
            min_token_len: 2,
            artifact_patterns: DEFAULT_ARTIFACT_PATTERNS
                .iter()
                .map(|s| (*s).to_owned())
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NormalizerConfig {
    stopwords: BTreeSet<String>,
    min_token_len: usize,
    artifact_patterns: Vec<Regex>,
}

impl Default for NormalizerConfig {
    fn default() -> Self {
        Self::new(Vec::<String>::new(), 2, DEFAULT_ARTIFACT_PATTERNS)
            .expect("default patterns compile")
    }
}

impl NormalizerConfig {
    /// Stopwords are lowercased on entry so the set is lowercase-closed.
    pub fn new<S, P>(
        stopwords: impl IntoIterator<Item = S>,
        min_token_len: usize,
        artifact_patterns: impl IntoIterator<Item = P>,
    ) -> Result<Self, Error>
    where
        S: AsRef<str>,
        P: AsRef<str>,
    {
        if min_token_len == 0 {
            return Err(Error::Config("min_token_len must be positive".into()));
        }
        let artifact_patterns = artifact_patterns
            .into_iter()
            .map(|p| {
                Regex::new(p.as_ref())
                    .map_err(|e| Error::Config(format!("artifact pattern {:?}: {e}", p.as_ref())))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            stopwords: stopwords
                .into_iter()
                .map(|s| s.as_ref().trim().to_lowercase())
                .filter(|s| !s.is_empty())
                .collect(),
            min_token_len,
            artifact_patterns,
        })
    }

    /// Builds the config from settings, resolving relative file paths
    /// against `base_dir`.
    pub fn from_settings(settings: &NormalizerSettings, base_dir: &Path) -> Result<Self, Error> {
        let mut stopwords = settings.stopwords.clone();
        if let Some(file) = &settings.stopwords_file {
            stopwords.extend(load_stopwords(base_dir.join(file))?);
        }
        Self::new(
            stopwords,
            settings.min_token_len,
            &settings.artifact_patterns,
        )
    }

    pub fn stopwords(&self) -> &BTreeSet<String> {
        &self.stopwords
    }

    pub fn min_token_len(&self) -> usize {
        self.min_token_len
    }

    fn keeps(&self, lemma: &str) -> bool {
        !lemma.is_empty()
            && lemma.chars().count() >= self.min_token_len
            && !self.stopwords.contains(lemma)
            && !self.artifact_patterns.iter().any(|re| re.is_match(lemma))
    }
}

/// Reads a stopword list: one word per line, `#` comments allowed.
pub fn load_stopwords(path: impl AsRef<Path>) -> Result<Vec<String>, Error> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(raw
        .lines()
        .map(strip_comment)
        .filter(|l| !l.is_empty())
        .map(str::to_lowercase)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub lemma: String,
}

/// A kept token with its character span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LemmaSpan {
    pub start: usize,
    pub end: usize,
    pub lemma: String,
}

/// Preprocessing pipeline: filter config plus the lemmatizer it applies.
#[derive(Clone)]
pub struct TextPrep {
    config: NormalizerConfig,
    lemmatizer: Arc<dyn Lemmatizer>,
}

impl std::fmt::Debug for TextPrep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TextPrep")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl Default for TextPrep {
    fn default() -> Self {
        Self::new(NormalizerConfig::default(), Arc::new(IdentityLemmatizer))
    }
}

impl TextPrep {
    pub fn new(config: NormalizerConfig, lemmatizer: Arc<dyn Lemmatizer>) -> Self {
        Self { config, lemmatizer }
    }

    pub fn config(&self) -> &NormalizerConfig {
        &self.config
    }

    /// Kept tokens in text order.
    pub fn tokens(&self, text: &str) -> Vec<Token> {
        text.unicode_words()
            .filter_map(|w| {
                let lemma = self.lemmatize(w)?;
                Some(Token {
                    surface: w.to_owned(),
                    lemma,
                })
            })
            .collect()
    }

    pub fn preprocess(&self, text: &str) -> Vec<String> {
        preprocess(text, &self.config, self.lemmatizer.as_ref())
    }

    pub fn preprocess_query(
        &self,
        question: &str,
        options: &[String],
    ) -> Result<Vec<String>, Error> {
        preprocess_query(question, options, &self.config, self.lemmatizer.as_ref())
    }

    /// Kept lemmas with character offsets into `text`.
    pub fn lemma_spans(&self, text: &str) -> Vec<LemmaSpan> {
        let mut out = Vec::new();
        let mut char_pos = 0usize;
        let mut byte_pos = 0usize;
        for (byte_start, word) in text.unicode_word_indices() {
            char_pos += text[byte_pos..byte_start].chars().count();
            let len = word.chars().count();
            if let Some(lemma) = self.lemmatize(word) {
                out.push(LemmaSpan {
                    start: char_pos,
                    end: char_pos + len,
                    lemma,
                });
            }
            char_pos += len;
            byte_pos = byte_start + word.len();
        }
        out
    }

    fn lemmatize(&self, surface: &str) -> Option<String> {
        lemmatize_one(surface, &self.config, self.lemmatizer.as_ref())
    }
}

fn lemmatize_one(
    surface: &str,
    config: &NormalizerConfig,
    lemmatizer: &dyn Lemmatizer,
) -> Option<String> {
    let lower = surface.to_lowercase();
    let lemma = lemmatizer.lemma(&lower).to_lowercase();
    config.keeps(&lemma).then_some(lemma)
}

/// Tokenize, lowercase, lemmatize and filter `text`.
pub fn preprocess(
    text: &str,
    config: &NormalizerConfig,
    lemmatizer: &dyn Lemmatizer,
) -> Vec<String> {
    text.unicode_words()
        .filter_map(|w| lemmatize_one(w, config, lemmatizer))
        .collect()
}

/// Preprocesses the question followed by options A..F, space-joined.
pub fn preprocess_query(
    question: &str,
    options: &[String],
    config: &NormalizerConfig,
    lemmatizer: &dyn Lemmatizer,
) -> Result<Vec<String>, Error> {
    if options.len() != 6 {
        return Err(Error::Invalid(format!(
            "expected six answer options, got {}",
            options.len()
        )));
    }
    let mut joined = String::from(question);
    for opt in options {
        joined.push(' ');
        joined.push_str(opt);
    }
    Ok(preprocess(&joined, config, lemmatizer))
}
