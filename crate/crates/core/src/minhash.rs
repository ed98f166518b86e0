//! MinHash-LSH approximate near-duplicate detection with an exact-Jaccard
//! oracle, configured as the comparative baseline: 64 permutations,
//! word-level 3-gram shingles, banding at b = 4 bands × r = 16 rows (S-curve
//! midpoint (1/4)^(1/16) ≈ 0.917, bracketing the 0.9 threshold).
//!
//! Candidate pairs surfaced by banding are confirmed against the exact
//! Jaccard of the shingle sets before they count, so the configured
//! threshold is exact rather than estimate-based. Byte-identical texts have
//! identical shingle sets and exact Jaccard 1.0, so the byte-exact duplicate
//! set is contained in the confirmed fuzzy duplicate set at any threshold
//! ≤ 1.

use crate::membership::ByteSet;
use crate::prng::splitmix64;
use serde::Serialize;
use std::collections::{BTreeSet, HashMap};
use thiserror::Error;
use xxhash_rust::xxh3::xxh3_64_with_seed;

/// Signature length (number of seeded hash functions).
pub const NUM_PERMUTATIONS: usize = 64;
/// LSH band count.
pub const LSH_BANDS: usize = 4;
/// Rows per band; LSH_BANDS · LSH_ROWS_PER_BAND = NUM_PERMUTATIONS.
pub const LSH_ROWS_PER_BAND: usize = 16;
/// Base for the per-permutation seed schedule: seed_i = splitmix64(BASE + i).
pub const SEED_SCHEDULE_BASE: u64 = 0x31f5_0000_0000_0000;

#[derive(Debug, Error, PartialEq)]
pub enum MinHashError {
    #[error("cannot compute a signature over an empty shingle set")]
    EmptyShingles,
    #[error("Jaccard of two empty sets is undefined")]
    BothEmpty,
    #[error("threshold {0} outside (0, 1)")]
    InvalidThreshold(f64),
}

/// Word-level 3-gram shingles of `text`.
///
/// Tokenize on whitespace; every consecutive 3-token window joined by a
/// single space is a shingle. Texts with fewer than 3 tokens fall back to
/// the whole token sequence as one shingle (the empty string for empty
/// text), so every text has at least one shingle.
pub fn shingle(text: &str) -> BTreeSet<String> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.len() < 3 {
        return BTreeSet::from([tokens.join(" ")]);
    }
    tokens.windows(3).map(|w| w.join(" ")).collect()
}

/// 64-value MinHash signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinHashSignature {
    pub sig: [u64; NUM_PERMUTATIONS],
}

fn permutation_seed(i: usize) -> u64 {
    splitmix64(SEED_SCHEDULE_BASE.wrapping_add(i as u64))
}

/// Signature over a shingle set: sig[i] = min over shingles of the i-th
/// seeded hash. Deterministic for a given set.
pub fn minhash(shingles: &BTreeSet<String>) -> Result<MinHashSignature, MinHashError> {
    if shingles.is_empty() {
        return Err(MinHashError::EmptyShingles);
    }
    let mut sig = [u64::MAX; NUM_PERMUTATIONS];
    for shingle in shingles {
        let bytes = shingle.as_bytes();
        for (i, slot) in sig.iter_mut().enumerate() {
            let h = xxh3_64_with_seed(bytes, permutation_seed(i));
            if h < *slot {
                *slot = h;
            }
        }
    }
    Ok(MinHashSignature { sig })
}

/// Fraction of matching signature coordinates; unbiased estimate of the
/// Jaccard similarity of the underlying sets.
pub fn estimate_jaccard(a: &MinHashSignature, b: &MinHashSignature) -> f64 {
    let matches = a.sig.iter().zip(&b.sig).filter(|(x, y)| x == y).count();
    matches as f64 / NUM_PERMUTATIONS as f64
}

/// |a ∩ b| / |a ∪ b| computed directly; the oracle for the estimator.
pub fn exact_jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> Result<f64, MinHashError> {
    if a.is_empty() && b.is_empty() {
        return Err(MinHashError::BothEmpty);
    }
    let intersection = a.intersection(b).count() as f64;
    let union = a.union(b).count() as f64;
    Ok(intersection / union)
}

/// One confirmed near-duplicate pair (indices into the input list).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DuplicatePair {
    pub earlier: usize,
    pub later: usize,
    pub jaccard: f64,
}

/// Output of [`lsh_dedup`].
#[derive(Debug, Clone, Serialize)]
pub struct LshReport {
    /// All banding candidates confirmed at or above the threshold.
    pub pairs: Vec<DuplicatePair>,
    /// Items that confirmed against at least one earlier item.
    pub fuzzy_duplicates: Vec<usize>,
}

/// Near-duplicate detection over an ordered text list.
///
/// Items colliding with an earlier item in any band become candidates; a
/// candidate pair counts only if the exact Jaccard of the shingle sets
/// reaches `threshold`. An item is a fuzzy duplicate if it confirms against
/// any earlier item. Deterministic given the seed schedule.
pub fn lsh_dedup(texts: &[String], threshold: f64) -> Result<LshReport, MinHashError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(MinHashError::InvalidThreshold(threshold));
    }
    let mut bands: Vec<HashMap<u64, Vec<usize>>> = vec![HashMap::new(); LSH_BANDS];
    let mut shingle_sets: Vec<BTreeSet<String>> = Vec::with_capacity(texts.len());
    let mut pairs = Vec::new();
    let mut fuzzy_duplicates = Vec::new();

    for (idx, text) in texts.iter().enumerate() {
        let shingles = shingle(text);
        let signature = minhash(&shingles)?;

        // Band keys: hash of the 16 raw signature words per band.
        let band_keys: Vec<u64> = (0..LSH_BANDS)
            .map(|b| {
                let start = b * LSH_ROWS_PER_BAND;
                let mut bytes = Vec::with_capacity(LSH_ROWS_PER_BAND * 8);
                for v in &signature.sig[start..start + LSH_ROWS_PER_BAND] {
                    bytes.extend_from_slice(&v.to_le_bytes());
                }
                xxh3_64_with_seed(&bytes, b as u64)
            })
            .collect();

        let mut candidates: BTreeSet<usize> = BTreeSet::new();
        for (b, key) in band_keys.iter().enumerate() {
            if let Some(bucket) = bands[b].get(key) {
                candidates.extend(bucket.iter().copied());
            }
        }

        let mut confirmed_any = false;
        for earlier in candidates {
            let j = exact_jaccard(&shingle_sets[earlier], &shingles)?;
            if j >= threshold {
                pairs.push(DuplicatePair {
                    earlier,
                    later: idx,
                    jaccard: j,
                });
                confirmed_any = true;
            }
        }
        if confirmed_any {
            fuzzy_duplicates.push(idx);
        }

        for (b, key) in band_keys.into_iter().enumerate() {
            bands[b].entry(key).or_default().push(idx);
        }
        shingle_sets.push(shingles);
    }

    Ok(LshReport {
        pairs,
        fuzzy_duplicates,
    })
}

/// Byte-exact versus fuzzy duplicate rates over one prompt list — the
/// comparison report shape.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub total: usize,
    pub threshold: f64,
    pub byte_exact_duplicates: usize,
    pub byte_exact_pct: f64,
    pub fuzzy_duplicates: usize,
    pub fuzzy_pct: f64,
    /// Items that are both byte-exact and fuzzy duplicates (always equal to
    /// `byte_exact_duplicates` by containment).
    pub both: usize,
    pub fuzzy_only: usize,
}

/// Run byte-exact and MinHash-LSH dedup over the same texts and tabulate.
pub fn compare_exact_vs_fuzzy(
    texts: &[String],
    threshold: f64,
) -> Result<ComparisonReport, MinHashError> {
    let lsh = lsh_dedup(texts, threshold)?;
    let mut seen = ByteSet::new();
    let byte_exact: Vec<usize> = texts
        .iter()
        .enumerate()
        .filter_map(|(i, t)| (!seen.insert_if_absent(t.as_bytes())).then_some(i))
        .collect();
    let fuzzy: BTreeSet<usize> = lsh.fuzzy_duplicates.iter().copied().collect();
    let both = byte_exact.iter().filter(|i| fuzzy.contains(i)).count();
    let total = texts.len();
    let pct = |count: usize| {
        if total == 0 {
            0.0
        } else {
            100.0 * count as f64 / total as f64
        }
    };
    Ok(ComparisonReport {
        total,
        threshold,
        byte_exact_duplicates: byte_exact.len(),
        byte_exact_pct: pct(byte_exact.len()),
        fuzzy_duplicates: fuzzy.len(),
        fuzzy_pct: pct(fuzzy.len()),
        both,
        fuzzy_only: fuzzy.len() - both,
    })
}
