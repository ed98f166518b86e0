//! Corpus-level deduplication over JSONL sources: ingestion, global
//! analysis with per-source breakdowns, cross-source Jaccard over duplicated
//! content, and audit trails.
//!
//! Deduplication is global across sources: a payload appearing in two
//! sources is one equivalence class, and its survivor is attributed to the
//! source of its first occurrence. Cross-source Jaccard is computed over the
//! *duplicated* payload sets — D(s) is the set of distinct payloads of
//! source s whose equivalence class has total multiplicity ≥ 2 anywhere in
//! the corpus — because that is what overlap-between-sources measures;
//! a pair with an empty union reports 0.0.
//!
//! Memory is O(distinct payload bytes + bucket overhead), not O(corpus
//! bytes); the analyzer holds each distinct payload once for byte
//! confirmation.

use crate::dedup::{
    dedup_multiset, fingerprint, verify_equivalence, Chunk, DedupResult, Disposition,
};
use crate::metrics::{approx_token_count, ReductionStats};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error at {context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corpus contains no valid chunks")]
    EmptyCorpus,
    #[error("dedup result inconsistent: {0}")]
    Verify(#[from] crate::dedup::VerifyError),
}

/// Ingestion counters for one JSONL stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IngestStats {
    /// Lines read (including skipped ones).
    pub lines: u64,
    /// Lines that were not valid JSON objects.
    pub malformed: u64,
    /// Valid JSON lines whose text field was absent or not a string.
    pub missing_field: u64,
}

/// Read one JSONL stream into chunks.
///
/// Each line must be a JSON object carrying `text_field` with a string
/// value; the chunk payload is the exact UTF-8 bytes of that value, no
/// trimming. Malformed lines and lines missing the field are skipped and
/// counted. Ordinals number the yielded chunks 0.. in stream order.
pub fn ingest_jsonl<R: BufRead>(
    reader: R,
    text_field: &str,
    source_label: &str,
) -> Result<(Vec<Chunk>, IngestStats), CorpusError> {
    let mut chunks = Vec::new();
    let mut stats = IngestStats::default();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CorpusError::Io {
            context: format!("{source_label} line {}", lineno + 1),
            source: e,
        })?;
        stats.lines += 1;
        if line.trim().is_empty() {
            stats.malformed += 1;
            continue;
        }
        let value: serde_json::Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(_) => {
                stats.malformed += 1;
                continue;
            }
        };
        match value.get(text_field).and_then(|v| v.as_str()) {
            Some(text) => {
                let ordinal = chunks.len();
                chunks.push(Chunk::with_source(
                    text.as_bytes().to_vec(),
                    source_label,
                    ordinal,
                ));
            }
            None => stats.missing_field += 1,
        }
    }
    Ok((chunks, stats))
}

/// One input stream for [`analyze_corpus`].
pub struct CorpusSource<R> {
    pub reader: R,
    pub text_field: String,
    pub label: String,
}

/// Jaccard between one unordered pair of sources, over duplicated payloads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourcePairJaccard {
    pub sources: [String; 2],
    pub jaccard: f64,
}

/// Corpus-level aggregation result.
#[derive(Debug, Clone, Serialize)]
pub struct CorpusReport {
    pub overall: ReductionStats,
    pub per_source: BTreeMap<String, ReductionStats>,
    pub cross_source_jaccard: Vec<SourcePairJaccard>,
    /// Output of the independent oracle verifier over the whole corpus.
    pub math_equivalence_violations: u64,
    pub malformed_lines: u64,
    pub missing_field_lines: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit_path: Option<String>,
}

/// Per-chunk audit record. Written in ordinal order, one JSON object per
/// line, fields always in this order; output is byte-deterministic for a
/// given corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub ordinal: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    /// SHA-256 of the payload, lowercase hex.
    pub audit256: String,
    /// "KEPT" or "DROPPED_DUPLICATE_OF".
    pub disposition: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duplicate_of: Option<u64>,
    pub payload_bytes: u64,
}

/// Serialize audit records as JSONL. Returns the record count.
pub fn write_audit<W: Write>(records: &[AuditRecord], mut out: W) -> std::io::Result<u64> {
    for rec in records {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
    }
    Ok(records.len() as u64)
}

/// Build the audit trail for a dedup run.
pub fn audit_records(chunks: &[Chunk], result: &DedupResult) -> Vec<AuditRecord> {
    chunks
        .iter()
        .zip(&result.dispositions)
        .map(|(chunk, disposition)| {
            let fp = fingerprint(&chunk.payload, true);
            let (disposition, duplicate_of) = match disposition {
                Disposition::Kept => ("KEPT".to_string(), None),
                Disposition::DroppedDuplicateOf(rep) => {
                    ("DROPPED_DUPLICATE_OF".to_string(), Some(*rep as u64))
                }
            };
            AuditRecord {
                ordinal: chunk.ordinal as u64,
                source: chunk.source.clone(),
                audit256: fp.audit256_hex().expect("audit mode"),
                disposition,
                duplicate_of,
                payload_bytes: chunk.payload.len() as u64,
            }
        })
        .collect()
}

/// Everything [`analyze_corpus`] derives; `report` is the serializable
/// surface, the rest supports audit writing and downstream checks.
#[derive(Debug)]
pub struct CorpusAnalysis {
    pub report: CorpusReport,
    pub chunks: Vec<Chunk>,
    pub result: DedupResult,
}

/// Globally deduplicate a multi-source corpus and aggregate.
pub fn analyze_corpus<R: BufRead>(
    sources: Vec<CorpusSource<R>>,
) -> Result<CorpusAnalysis, CorpusError> {
    let mut chunks: Vec<Chunk> = Vec::new();
    let mut malformed = 0u64;
    let mut missing_field = 0u64;
    let mut source_order: Vec<String> = Vec::new();

    for src in sources {
        let (mut src_chunks, stats) = ingest_jsonl(src.reader, &src.text_field, &src.label)?;
        malformed += stats.malformed;
        missing_field += stats.missing_field;
        if !source_order.contains(&src.label) {
            source_order.push(src.label.clone());
        }
        for chunk in src_chunks.drain(..) {
            let ordinal = chunks.len();
            chunks.push(Chunk { ordinal, ..chunk });
        }
    }

    if chunks.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }

    let result = dedup_multiset(&chunks);
    let violations = verify_equivalence(&chunks, &result)?;

    // Per-class occurrence counts and source membership, keyed by the
    // representative's position.
    let mut occurrences: HashMap<usize, u64> = HashMap::new();
    let mut class_sources: HashMap<usize, BTreeSet<&str>> = HashMap::new();
    for (pos, disposition) in result.dispositions.iter().enumerate() {
        let rep = match disposition {
            Disposition::Kept => pos,
            Disposition::DroppedDuplicateOf(rep) => *rep,
        };
        *occurrences.entry(rep).or_default() += 1;
        if let Some(src) = chunks[pos].source.as_deref() {
            class_sources.entry(rep).or_default().insert(src);
        }
    }

    // Per-source accumulation. Survivors attribute to the source of the
    // first occurrence.
    #[derive(Default)]
    struct Acc {
        total: u64,
        unique: u64,
        raw_bytes: u64,
        dedup_bytes: u64,
        raw_tokens: u64,
        dedup_tokens: u64,
    }
    let mut per_source_acc: BTreeMap<&str, Acc> = BTreeMap::new();
    let mut overall = Acc::default();
    for label in &source_order {
        per_source_acc.entry(label.as_str()).or_default();
    }
    for (pos, chunk) in chunks.iter().enumerate() {
        let bytes = chunk.payload.len() as u64;
        let tokens = approx_token_count(&chunk.payload);
        let kept = matches!(result.dispositions[pos], Disposition::Kept);
        overall.total += 1;
        overall.raw_bytes += bytes;
        overall.raw_tokens += tokens;
        if kept {
            overall.unique += 1;
            overall.dedup_bytes += bytes;
            overall.dedup_tokens += tokens;
        }
        if let Some(src) = chunk.source.as_deref() {
            let acc = per_source_acc.entry(src).or_default();
            acc.total += 1;
            acc.raw_bytes += bytes;
            acc.raw_tokens += tokens;
            if kept {
                acc.unique += 1;
                acc.dedup_bytes += bytes;
                acc.dedup_tokens += tokens;
            }
        }
    }

    // Duplicated-payload set per source: classes with multiplicity ≥ 2.
    let mut dup_sets: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
    for label in &source_order {
        dup_sets.entry(label.as_str()).or_default();
    }
    for (&rep, &count) in &occurrences {
        if count >= 2 {
            if let Some(srcs) = class_sources.get(&rep) {
                for src in srcs {
                    dup_sets.entry(src).or_default().insert(rep);
                }
            }
        }
    }

    let mut cross_source_jaccard = Vec::new();
    for (i, a) in source_order.iter().enumerate() {
        for b in source_order.iter().skip(i + 1) {
            let (first, second) = if a <= b { (a, b) } else { (b, a) };
            let da = &dup_sets[first.as_str()];
            let db = &dup_sets[second.as_str()];
            let intersection = da.intersection(db).count() as f64;
            let union = da.union(db).count() as f64;
            let jaccard = if union == 0.0 {
                0.0
            } else {
                intersection / union
            };
            cross_source_jaccard.push(SourcePairJaccard {
                sources: [first.clone(), second.clone()],
                jaccard,
            });
        }
    }
    cross_source_jaccard.sort_by(|x, y| x.sources.cmp(&y.sources));

    let stats_of = |acc: &Acc| {
        ReductionStats::compute(
            acc.total,
            acc.unique,
            acc.raw_bytes,
            acc.dedup_bytes,
            acc.raw_tokens,
            acc.dedup_tokens,
        )
    };
    let report = CorpusReport {
        overall: stats_of(&overall),
        per_source: per_source_acc
            .iter()
            .map(|(label, acc)| (label.to_string(), stats_of(acc)))
            .collect(),
        cross_source_jaccard,
        math_equivalence_violations: violations,
        malformed_lines: malformed,
        missing_field_lines: missing_field,
        audit_path: None,
    };

    Ok(CorpusAnalysis {
        report,
        chunks,
        result,
    })
}
