use super::{Embedder, EmbeddingVector, ProviderError};
use crate::text_prep::TextPrep;

const SLOTS_PER_LEMMA: u64 = 2;
const DEFAULT_SEED: u64 = 0x5eed_1e55_0fc0_ffee;

/// Deterministic signed feature-hashing embedder over lemma multisets.
///
/// Texts that share more lemmas have higher expected cosine similarity.
/// Texts without any kept lemma map to a fixed reserved unit vector.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
    seed: u64,
    max_batch: usize,
    prep: TextPrep,
}

impl HashEmbedder {
    /// `dim` is raised to 8 if smaller.
    pub fn new(dim: usize) -> Self {
        Self {
            dim: dim.max(8),
            seed: DEFAULT_SEED,
            max_batch: 64,
            prep: TextPrep::default(),
        }
    }

    pub fn with_prep(mut self, prep: TextPrep) -> Self {
        self.prep = prep;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_batch(mut self, max_batch: usize) -> Self {
        self.max_batch = max_batch.max(1);
        self
    }

    pub fn embed_one(&self, text: &str) -> EmbeddingVector {
        EmbeddingVector::normalized(self.raw(text))
    }

    fn raw(&self, text: &str) -> Vec<f32> {
        let mut v = vec![0f32; self.dim];
        for lemma in self.prep.preprocess(text) {
            let h = fnv1a(lemma.as_bytes(), self.seed);
            for slot in 0..SLOTS_PER_LEMMA {
                let bits = splitmix(h ^ slot.wrapping_mul(0x9e37_79b9_7f4a_7c15));
                let idx = (bits % self.dim as u64) as usize;
                let sign = if bits >> 63 == 0 { 1.0 } else { -1.0 };
                v[idx] += sign;
            }
        }
        if v.iter().all(|x| *x == 0.0) {
            return self.reserved();
        }
        v
    }

    fn reserved(&self) -> Vec<f32> {
        vec![1.0; self.dim]
    }
}

impl Embedder for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn max_batch(&self) -> usize {
        self.max_batch
    }

    fn embed_raw(
        &self,
        texts: &[String],
        _contextual: bool,
    ) -> Result<Vec<Vec<f32>>, ProviderError> {
        Ok(texts.iter().map(|t| self.raw(t)).collect())
    }
}

fn fnv1a(bytes: &[u8], seed: u64) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
