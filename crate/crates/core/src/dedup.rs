//! Byte-exact chunk deduplication.
//!
//! Two chunks are equivalent iff their payloads are identical byte sequences
//! of equal length. No case folding, no whitespace trimming, no Unicode
//! normalization. Deduplicating a multiset keeps the first occurrence of each
//! equivalence class, in input order.
//!
//! The 64-bit fingerprint is a bucketing accelerator only: equality is always
//! confirmed by full byte comparison within a bucket, so correctness never
//! rests on the hash.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeSet, HashMap};
use thiserror::Error;
use xxhash_rust::xxh3::xxh3_64_with_seed;

/// Fixed seed for the 64-bit payload digest (XXH3-64). Never randomized
/// per-process: fingerprints must be identical across runs, platforms, and
/// process restarts.
pub const FAST64_SEED: u64 = 0x5eed_c0de_0000_0001;

/// One retrieved passage (or turn, or record) treated as an atomic
/// byte-string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    /// Exact payload bytes.
    pub payload: Vec<u8>,
    /// Optional source label (corpus name, retriever branch, ...).
    pub source: Option<String>,
    /// Zero-based position in the input multiset.
    pub ordinal: usize,
}

impl Chunk {
    pub fn new(payload: impl Into<Vec<u8>>, ordinal: usize) -> Self {
        Self {
            payload: payload.into(),
            source: None,
            ordinal,
        }
    }

    pub fn with_source(
        payload: impl Into<Vec<u8>>,
        source: impl Into<String>,
        ordinal: usize,
    ) -> Self {
        Self {
            payload: payload.into(),
            source: Some(source.into()),
            ordinal,
        }
    }

    pub fn len(&self) -> usize {
        self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payload.is_empty()
    }
}

/// Content digest of a payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fingerprint {
    /// XXH3-64 of the payload with [`FAST64_SEED`].
    pub fast64: u64,
    /// SHA-256 of the payload; present only in audit-trail mode.
    pub audit256: Option<[u8; 32]>,
}

impl Fingerprint {
    /// Hex rendering of the audit digest, if present.
    pub fn audit256_hex(&self) -> Option<String> {
        self.audit256.map(hex_digest)
    }
}

pub(crate) fn hex_digest(d: [u8; 32]) -> String {
    let mut s = String::with_capacity(64);
    for b in d {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Fast 64-bit payload digest used for bucketing.
pub fn fast64(payload: &[u8]) -> u64 {
    xxh3_64_with_seed(payload, FAST64_SEED)
}

/// Fingerprint a payload. With `audit` set, also computes the SHA-256 digest.
pub fn fingerprint(payload: &[u8], audit: bool) -> Fingerprint {
    let audit256 = audit.then(|| {
        let mut h = Sha256::new();
        h.update(payload);
        h.finalize().into()
    });
    Fingerprint {
        fast64: fast64(payload),
        audit256,
    }
}

/// Per-ordinal outcome of deduplication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Disposition {
    /// First occurrence of its equivalence class; survives.
    Kept,
    /// Byte-identical to the kept chunk at the given (strictly smaller)
    /// ordinal.
    DroppedDuplicateOf(usize),
}

/// Result of deduplicating one ordered multiset.
#[derive(Debug, Clone)]
pub struct DedupResult {
    /// Surviving chunks in first-occurrence order.
    pub unique: Vec<Chunk>,
    /// One entry per input position, in input order.
    pub dispositions: Vec<Disposition>,
    pub total_count: usize,
    pub unique_count: usize,
    pub duplicate_count: usize,
}

/// Deduplicate an ordered multiset of chunks.
///
/// Positions in the input slice are the ordinals recorded in
/// `dispositions`; survivors keep their original `Chunk` fields. The
/// function is total and pure: any byte multiset (including empty payloads
/// and an empty multiset) is legal input, and the result depends only on the
/// input order.
pub fn dedup_multiset(chunks: &[Chunk]) -> DedupResult {
    dedup_with_hasher(chunks, fast64)
}

/// Dedup with a caller-supplied bucketing hash. Used by tests to force every
/// chunk into one bucket and prove that byte confirmation alone decides
/// equality.
pub(crate) fn dedup_with_hasher(chunks: &[Chunk], hash: impl Fn(&[u8]) -> u64) -> DedupResult {
    // fast64 → positions of class representatives sharing that hash
    let mut buckets: HashMap<u64, Vec<usize>> = HashMap::new();
    let mut dispositions = Vec::with_capacity(chunks.len());
    let mut kept = Vec::new();

    for (pos, chunk) in chunks.iter().enumerate() {
        let h = hash(&chunk.payload);
        let reps = buckets.entry(h).or_default();
        match reps
            .iter()
            .find(|&&rep| chunks[rep].payload == chunk.payload)
        {
            Some(&rep) => dispositions.push(Disposition::DroppedDuplicateOf(rep)),
            None => {
                reps.push(pos);
                dispositions.push(Disposition::Kept);
                kept.push(pos);
            }
        }
    }

    let unique: Vec<Chunk> = kept.iter().map(|&p| chunks[p].clone()).collect();
    let unique_count = unique.len();
    DedupResult {
        unique,
        dispositions,
        total_count: chunks.len(),
        unique_count,
        duplicate_count: chunks.len() - unique_count,
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VerifyError {
    #[error("result total_count {result} does not match input length {input}")]
    CountMismatch { result: usize, input: usize },
}

/// Independently re-derive the distinct-payload set and count mismatches
/// against `result.unique`.
///
/// The oracle pass is an ordered set over raw payload bytes — no
/// fingerprints, no shortcuts — so it shares no failure mode with the
/// bucketing path. Returns 0 iff the result's survivor set is exactly the
/// input's distinct-payload set (payloads appearing twice among the
/// survivors each count as a violation).
pub fn verify_equivalence(chunks: &[Chunk], result: &DedupResult) -> Result<u64, VerifyError> {
    if result.total_count != chunks.len() {
        return Err(VerifyError::CountMismatch {
            result: result.total_count,
            input: chunks.len(),
        });
    }

    let reference: BTreeSet<&[u8]> = chunks.iter().map(|c| c.payload.as_slice()).collect();
    let survivors: BTreeSet<&[u8]> = result.unique.iter().map(|c| c.payload.as_slice()).collect();

    let missing = reference.difference(&survivors).count() as u64;
    let spurious = survivors.difference(&reference).count() as u64;
    let repeated = (result.unique.len() - survivors.len()) as u64;
    Ok(missing + spurious + repeated)
}
