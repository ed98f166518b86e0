//! Minimal BM25 retriever with per-query dedup statistics and the
//! duplicate-multiplicity-factor construction for long-context scaling runs.
//!
//! Fixed conventions:
//! * Tokenization: Unicode lowercase, split on runs of non-alphanumeric
//!   characters.
//! * Scoring: Okapi BM25 with k1 = 1.2, b = 0.75 by default;
//!   idf(t) = max(0, ln((N − df + 0.5) / (df + 0.5))). The per-document
//!   score sums over query token occurrences in query order (repeated query
//!   terms count each time). Ties break by ascending document ordinal.

use crate::dedup::{dedup_multiset, Chunk, Disposition};
use serde::Serialize;
use std::collections::HashMap;
use thiserror::Error;

pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RetrieverError {
    #[error("cannot build an index over an empty corpus")]
    EmptyCorpus,
}

/// Lowercased alphanumeric tokens of `text`.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub term_frequency: u32,
}

/// Inverted index over a passage corpus. Immutable after build; concurrent
/// queries are safe.
#[derive(Debug)]
pub struct InvertedIndex {
    postings: HashMap<String, Vec<Posting>>,
    doc_lengths: Vec<u32>,
    avg_doc_length: f64,
    doc_count: usize,
    docs: Vec<Chunk>,
    pub k1: f64,
    pub b: f64,
}

/// Build an index with the default BM25 parameters.
pub fn build_index(passages: Vec<Chunk>) -> Result<InvertedIndex, RetrieverError> {
    build_index_with_params(passages, DEFAULT_K1, DEFAULT_B)
}

pub fn build_index_with_params(
    passages: Vec<Chunk>,
    k1: f64,
    b: f64,
) -> Result<InvertedIndex, RetrieverError> {
    if passages.is_empty() {
        return Err(RetrieverError::EmptyCorpus);
    }
    let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
    let mut doc_lengths = Vec::with_capacity(passages.len());
    for (doc, passage) in passages.iter().enumerate() {
        let text = String::from_utf8_lossy(&passage.payload);
        let tokens = tokenize(&text);
        doc_lengths.push(tokens.len() as u32);
        let mut tf: HashMap<String, u32> = HashMap::new();
        for token in tokens {
            *tf.entry(token).or_default() += 1;
        }
        for (term, count) in tf {
            postings.entry(term).or_default().push(Posting {
                doc: doc as u32,
                term_frequency: count,
            });
        }
    }
    // Documents were visited in ordinal order, so postings are sorted by
    // construction; keep the sort as a guard for future parallel builds.
    for list in postings.values_mut() {
        list.sort_by_key(|p| p.doc);
    }
    let avg_doc_length = doc_lengths.iter().map(|&l| l as f64).sum::<f64>() / passages.len() as f64;
    Ok(InvertedIndex {
        postings,
        avg_doc_length,
        doc_count: passages.len(),
        doc_lengths,
        docs: passages,
        k1,
        b,
    })
}

impl InvertedIndex {
    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn doc_lengths(&self) -> &[u32] {
        &self.doc_lengths
    }

    pub fn postings(&self, term: &str) -> Option<&[Posting]> {
        self.postings.get(term).map(|v| v.as_slice())
    }

    pub fn docs(&self) -> &[Chunk] {
        &self.docs
    }

    fn idf(&self, document_frequency: usize) -> f64 {
        let n = self.doc_count as f64;
        let df = document_frequency as f64;
        ((n - df + 0.5) / (df + 0.5)).ln().max(0.0)
    }

    /// Score every document matching at least one query token and return
    /// the top `k` as (chunk, score), descending score, ties by ascending
    /// ordinal. No matches yields an empty list.
    pub fn query(&self, text: &str, k: usize) -> Vec<(Chunk, f64)> {
        let mut scores: HashMap<u32, f64> = HashMap::new();
        for token in tokenize(text) {
            let Some(postings) = self.postings.get(&token) else {
                continue;
            };
            let idf = self.idf(postings.len());
            for posting in postings {
                let tf = posting.term_frequency as f64;
                let dl = self.doc_lengths[posting.doc as usize] as f64;
                let norm = tf * (self.k1 + 1.0)
                    / (tf + self.k1 * (1.0 - self.b + self.b * dl / self.avg_doc_length));
                *scores.entry(posting.doc).or_default() += idf * norm;
            }
        }
        let mut ranked: Vec<(u32, f64)> = scores.into_iter().collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(k);
        ranked
            .into_iter()
            .map(|(doc, score)| (self.docs[doc as usize].clone(), score))
            .collect()
    }
}

/// Dedup statistics over one query's ranked result multiset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryDedupStat {
    pub query_id: String,
    pub k_requested: usize,
    pub returned_count: usize,
    pub unique_count: usize,
    /// 1 − unique/returned; 0.0 for an empty result list.
    pub reduction_fraction: f64,
    /// Dropped chunks whose surviving first occurrence carries a different
    /// source label.
    pub cross_source_duplicates: usize,
}

/// Deduplicate a ranked result list and fill the per-query statistics.
pub fn per_query_stats(query_id: &str, k_requested: usize, results: &[Chunk]) -> QueryDedupStat {
    // Re-ordinal the result multiset: retrieval may return the same corpus
    // passage (and therefore the same corpus ordinal) several times.
    let multiset: Vec<Chunk> = results
        .iter()
        .enumerate()
        .map(|(i, c)| Chunk {
            payload: c.payload.clone(),
            source: c.source.clone(),
            ordinal: i,
        })
        .collect();
    let dedup = dedup_multiset(&multiset);
    let cross_source_duplicates = dedup
        .dispositions
        .iter()
        .enumerate()
        .filter(|(pos, d)| match d {
            Disposition::Kept => false,
            Disposition::DroppedDuplicateOf(rep) => multiset[*rep].source != multiset[*pos].source,
        })
        .count();
    let reduction_fraction = if dedup.total_count == 0 {
        0.0
    } else {
        1.0 - dedup.unique_count as f64 / dedup.total_count as f64
    };
    QueryDedupStat {
        query_id: query_id.to_string(),
        k_requested,
        returned_count: dedup.total_count,
        unique_count: dedup.unique_count,
        reduction_fraction,
        cross_source_duplicates,
    }
}

/// Repeat the result list `m` times in block order (r1..rn, r1..rn, ...)
/// and re-ordinal; deduplicating the output recovers exactly the input's
/// distinct set. `m` must be ≥ 1.
pub fn apply_multiplicity_factor(results: &[Chunk], m: usize) -> Vec<Chunk> {
    assert!(m >= 1, "multiplicity factor must be >= 1");
    let mut out = Vec::with_capacity(results.len() * m);
    for _ in 0..m {
        for chunk in results {
            let ordinal = out.len();
            out.push(Chunk {
                payload: chunk.payload.clone(),
                source: chunk.source.clone(),
                ordinal,
            });
        }
    }
    out
}
