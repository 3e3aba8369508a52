//! Similarity retrieval over a memory bank.
//!
//! The default embedder hashes lowercase unigrams into a fixed number of
//! buckets, counts, and L2-normalizes. It is deterministic and
//! dependency-free, which is what reproducible RL rewards need; production
//! deployments can plug an external embedding endpoint in behind the same
//! [`Embedder`] contract.

use std::collections::HashMap;
use thiserror::Error;

use crate::memory::{MemoryBank, MemoryId};

pub const DEFAULT_EMBEDDING_DIM: usize = 256;

/// Default retrieval depth for manager-side context lookups.
pub const DEFAULT_MANAGER_K: usize = 10;

/// Default retrieval depth when answering questions.
pub const DEFAULT_ANSWER_K: usize = 60;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RetrievalError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
}

/// Fixed-dimension real vector plus its Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
    norm: f64,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        Self { values, norm }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { values: vec![0.0; dim], norm: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Text-to-vector contract. Implementations must be deterministic:
/// identical text maps to an identical vector.
pub trait Embedder {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> EmbeddingVector;
}

/// Hashed-unigram bag-of-words embedder. Tokens are lowercase alphanumeric
/// runs; each token is FNV-1a hashed into one of `dim` buckets; bucket
/// counts are L2-normalized. Empty input embeds to the zero vector.
#[derive(Debug, Clone)]
pub struct HashedUnigramEmbedder {
    dim: usize,
}

impl HashedUnigramEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }
}

impl Default for HashedUnigramEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_EMBEDDING_DIM)
    }
}

// FNV-1a, fixed offset/prime: stable across platforms and toolchains.
fn fnv1a(token: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in token.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x1000_0000_01b3);
    }
    hash
}

/// Lowercase alphanumeric tokenization shared by the embedder and the
/// lexical-overlap features.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

impl Embedder for HashedUnigramEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> EmbeddingVector {
        let mut counts = vec![0.0f64; self.dim];
        let mut any = false;
        for token in tokenize(text) {
            let bucket = (fnv1a(&token) % self.dim as u64) as usize;
            counts[bucket] += 1.0;
            any = true;
        }
        if !any {
            return EmbeddingVector::zeros(self.dim);
        }
        let norm = counts.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut counts {
            *v /= norm;
        }
        EmbeddingVector::new(counts)
    }
}

/// `a·b / (‖a‖‖b‖)`, or 0 when either norm is 0.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, RetrievalError> {
    if a.dim() != b.dim() {
        return Err(RetrievalError::DimensionMismatch { left: a.dim(), right: b.dim() });
    }
    if a.norm() == 0.0 || b.norm() == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum();
    Ok(dot / (a.norm() * b.norm()))
}

/// Similarity-ranked retrieval result: `(entry id, score)` pairs with
/// non-increasing scores. Ties break by ascending insertion index, so a
/// zero-norm query degrades to the first `min(k, |bank|)` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedRetrieval {
    pub items: Vec<(MemoryId, f64)>,
    pub query_text: String,
}

impl RankedRetrieval {
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    /// Resolves the ranked ids against a bank snapshot so policies can see
    /// the memory texts behind the scores. Entries deleted since ranking
    /// are skipped.
    pub fn materialize(&self, bank: &MemoryBank) -> Vec<RetrievedItem> {
        self.items
            .iter()
            .filter_map(|(id, score)| {
                bank.get(*id).map(|entry| RetrievedItem {
                    id: *id,
                    score: *score,
                    text: entry.text.clone(),
                    speaker: entry.speaker.clone(),
                    updated_at: entry.updated_at,
                })
            })
            .collect()
    }
}

/// One retrieved memory with its similarity score and a snapshot of the
/// entry fields policies consume.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RetrievedItem {
    pub id: MemoryId,
    pub score: f64,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker: Option<String>,
    pub updated_at: u64,
}

/// Caching retriever. The cache maps entry id to (text, vector) and is
/// re-synced against the bank before every query, so an UPDATEd entry is
/// always scored by the embedding of its current text.
pub struct Retriever<E: Embedder = HashedUnigramEmbedder> {
    embedder: E,
    cache: HashMap<MemoryId, (String, EmbeddingVector)>,
}

impl Default for Retriever<HashedUnigramEmbedder> {
    fn default() -> Self {
        Self::new(HashedUnigramEmbedder::default())
    }
}

impl<E: Embedder> Retriever<E> {
    pub fn new(embedder: E) -> Self {
        Self { embedder, cache: HashMap::new() }
    }

    pub fn embedder(&self) -> &E {
        &self.embedder
    }

    /// Brings the cache in sync with `bank`: new and re-texted entries are
    /// re-embedded, deleted entries dropped.
    pub fn sync(&mut self, bank: &MemoryBank) {
        self.cache.retain(|id, _| bank.contains(*id));
        for entry in bank.iter() {
            let stale = match self.cache.get(&entry.id) {
                Some((text, _)) => text != &entry.text,
                None => true,
            };
            if stale {
                self.cache
                    .insert(entry.id, (entry.text.clone(), self.embedder.embed(&entry.text)));
            }
        }
    }

    #[cfg(test)]
    pub(crate) fn cached_vector(&self, id: MemoryId) -> Option<&EmbeddingVector> {
        self.cache.get(&id).map(|(_, v)| v)
    }

    /// Top-`k` entries of `bank` by cosine similarity to `query`.
    /// Deterministic: ties break by insertion index.
    pub fn retrieve_top_k(&mut self, query: &str, bank: &MemoryBank, k: usize) -> RankedRetrieval {
        self.retrieve_top_k_filtered(query, bank, k, |_| true)
    }

    /// Top-`k` restricted to entries accepted by `filter` (used for
    /// per-participant retrieval).
    pub fn retrieve_top_k_filtered(
        &mut self,
        query: &str,
        bank: &MemoryBank,
        k: usize,
        filter: impl Fn(&crate::memory::MemoryEntry) -> bool,
    ) -> RankedRetrieval {
        self.sync(bank);
        let query_vec = self.embedder.embed(query);
        let mut scored: Vec<(usize, MemoryId, f64)> = bank
            .iter()
            .enumerate()
            .filter(|(_, e)| filter(e))
            .map(|(idx, e)| {
                let (_, vec) = &self.cache[&e.id];
                let score = cosine_similarity(&query_vec, vec).expect("cache dims agree");
                (idx, e.id, score)
            })
            .collect();
        scored.sort_by(|a, b| {
            b.2.partial_cmp(&a.2).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0))
        });
        scored.truncate(k);
        RankedRetrieval {
            items: scored.into_iter().map(|(_, id, s)| (id, s)).collect(),
            query_text: query.to_owned(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::MemoryOperationDecision;

    fn bank_of(texts: &[&str]) -> MemoryBank {
        let mut bank = MemoryBank::new();
        for t in texts {
            bank.apply(&MemoryOperationDecision::add(*t), true).unwrap();
        }
        bank
    }

    #[test]
    fn empty_text_embeds_to_zero_vector() {
        let embedder = HashedUnigramEmbedder::default();
        let v = embedder.embed("");
        assert_eq!(v.norm(), 0.0);
        assert_eq!(v.dim(), DEFAULT_EMBEDDING_DIM);
        assert_eq!(embedder.embed("?!  ,").norm(), 0.0);
    }

    #[test]
    fn embedding_is_deterministic_and_unit_norm() {
        let embedder = HashedUnigramEmbedder::default();
        let a = embedder.embed("Andrew adopted a dog named Buddy");
        let b = embedder.embed("Andrew adopted a dog named Buddy");
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn repeated_token_preserves_direction() {
        let embedder = HashedUnigramEmbedder::default();
        let single = embedder.embed("dog");
        let double = embedder.embed("dog dog");
        assert!((single.norm() - 1.0).abs() < 1e-9);
        assert_eq!(single.values(), double.values());
    }

    #[test]
    fn cosine_basic_identities() {
        let v = EmbeddingVector::new(vec![0.6, 0.8]);
        assert!((cosine_similarity(&v, &v).unwrap() - 1.0).abs() < 1e-12);

        let e1 = EmbeddingVector::new(vec![1.0, 0.0]);
        let e2 = EmbeddingVector::new(vec![0.0, 1.0]);
        assert_eq!(cosine_similarity(&e1, &e2).unwrap(), 0.0);

        let neg = EmbeddingVector::new(vec![-0.6, -0.8]);
        assert!((cosine_similarity(&v, &neg).unwrap() + 1.0).abs() < 1e-12);

        let zero = EmbeddingVector::zeros(2);
        assert_eq!(cosine_similarity(&v, &zero).unwrap(), 0.0);

        let short = EmbeddingVector::new(vec![1.0]);
        assert_eq!(
            cosine_similarity(&v, &short).unwrap_err(),
            RetrievalError::DimensionMismatch { left: 2, right: 1 }
        );
    }

    #[test]
    fn retrieve_from_empty_bank_is_empty() {
        let mut retriever = Retriever::default();
        let result = retriever.retrieve_top_k("anything", &MemoryBank::new(), 5);
        assert!(result.is_empty());
    }

    #[test]
    fn k_larger_than_bank_returns_all() {
        let bank = bank_of(&["one fact", "two fact", "three fact"]);
        let mut retriever = Retriever::default();
        let result = retriever.retrieve_top_k("fact", &bank, 60);
        assert_eq!(result.len(), 3);
    }

    #[test]
    fn zero_norm_query_returns_insertion_order() {
        let bank = bank_of(&["alpha", "beta", "gamma"]);
        let mut retriever = Retriever::default();
        let result = retriever.retrieve_top_k("", &bank, 2);
        assert_eq!(result.items[0].0, MemoryId(0));
        assert_eq!(result.items[1].0, MemoryId(1));
        assert!(result.items.iter().all(|(_, s)| *s == 0.0));
    }

    #[test]
    fn cache_tracks_updates() {
        let mut bank = bank_of(&["likes tea"]);
        let mut retriever = Retriever::default();
        retriever.retrieve_top_k("tea", &bank, 1);
        bank.apply(&MemoryOperationDecision::update(MemoryId(0), "likes coffee"), true).unwrap();
        retriever.sync(&bank);
        let expected = retriever.embedder().embed("likes coffee");
        assert_eq!(retriever.cached_vector(MemoryId(0)).unwrap(), &expected);
    }
}
