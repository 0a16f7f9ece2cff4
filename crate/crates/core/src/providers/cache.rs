use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Embedder, ProviderError};
use crate::error::Error;

/// Embedding cache keyed by (text hash, provider dim, contextual flag).
#[derive(Debug, Default)]
pub struct EmbeddingCache {
    entries: Mutex<HashMap<String, Vec<f32>>>,
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    key: String,
    vector: Vec<f32>,
}

impl EmbeddingCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn key(text: &str, dim: usize, contextual: bool) -> String {
        let digest = Sha256::digest(text.as_bytes());
        format!("{}:{dim}:{}", hex::encode(digest), u8::from(contextual))
    }

    pub fn len(&self) -> usize {
        self.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, HashMap<String, Vec<f32>>> {
        self.entries.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn get(&self, key: &str) -> Option<Vec<f32>> {
        self.lock().get(key).cloned()
    }

    pub fn insert(&self, key: String, vector: Vec<f32>) {
        self.lock().insert(key, vector);
    }

    /// Loads a cache file; a missing file yields an empty cache.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, Error> {
        let path = path.as_ref();
        let cache = Self::new();
        let file = match fs::File::open(path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(cache),
            Err(e) => return Err(Error::io(path, e)),
        };
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let entry: CacheLine = serde_json::from_str(&line)
                .map_err(|e| Error::json(path.display().to_string(), e))?;
            cache.insert(entry.key, entry.vector);
        }
        Ok(cache)
    }

    /// Writes entries sorted by key.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), Error> {
        let path = path.as_ref();
        let sorted: BTreeMap<String, Vec<f32>> = self.lock().clone().into_iter().collect();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for (key, vector) in sorted {
            let line = serde_json::to_string(&CacheLine { key, vector })
                .map_err(|e| Error::json("cache entry", e))?;
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Serves a batch from the cache when every text is cached; otherwise the
/// whole batch goes to the provider so contextual encoding sees its
/// neighbours.
pub struct CachedEmbedder<E> {
    inner: E,
    cache: Arc<EmbeddingCache>,
}

impl<E: Embedder> CachedEmbedder<E> {
    pub fn new(inner: E, cache: Arc<EmbeddingCache>) -> Self {
        Self { inner, cache }
    }

    pub fn cache(&self) -> &Arc<EmbeddingCache> {
        &self.cache
    }
}

impl<E: Embedder> Embedder for CachedEmbedder<E> {
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
        let dim = self.inner.dim();
        let keys: Vec<String> = texts
            .iter()
            .map(|t| EmbeddingCache::key(t, dim, contextual))
            .collect();
        let hits: Option<Vec<Vec<f32>>> = keys.iter().map(|k| self.cache.get(k)).collect();
        if let Some(hits) = hits {
            return Ok(hits);
        }
        let vectors = self.inner.embed_raw(texts, contextual)?;
        if vectors.len() == texts.len() {
            for (k, v) in keys.into_iter().zip(&vectors) {
                self.cache.insert(k, v.clone());
            }
        }
        Ok(vectors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{CountingEmbedder, HashEmbedder};

    #[test]
    fn second_pass_is_served_from_cache() {
        let counting = CountingEmbedder::new(HashEmbedder::new(16));
        let calls = counting.counter();
        let cache = Arc::new(EmbeddingCache::new());
        let e = CachedEmbedder::new(counting, Arc::clone(&cache));
        let texts = vec!["один".to_string(), "два".to_string()];
        let first = e.embed_batch(&texts, true).unwrap();
        assert_eq!(calls.get(), 1);
        let second = e.embed_batch(&texts, true).unwrap();
        assert_eq!(calls.get(), 1);
        assert_eq!(first, second);
        // contextual flag is part of the key
        e.embed_batch(&texts, false).unwrap();
        assert_eq!(calls.get(), 2);

        let f = tempfile::NamedTempFile::new().unwrap();
        cache.save(f.path()).unwrap();
        let back = EmbeddingCache::load(f.path()).unwrap();
        assert_eq!(back.len(), 4);
        assert!(EmbeddingCache::load("/nonexistent/cache.jsonl")
            .unwrap()
            .is_empty());
    }
}
