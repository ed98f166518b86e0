//! Seeded synthetic-corpus generators. Every generator is byte-deterministic
//! for a given spec (SplitMix64 streams only, no platform-dependent state),
//! and plants its redundancy structure by construction so the true
//! multiplicity and reduction values are exact, not sampled.
//!
//! Payloads and turns are fixed-width (equal bytes and equal token counts
//! within a generator run), which makes byte reduction, token reduction,
//! and item reduction coincide exactly — the planted value is recoverable
//! from the spec in closed form.

use crate::dedup::fast64;
use crate::prng::{splitmix64, SplitMix64};
use crate::stats::{AuditVerdict, Category};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FixtureError {
    #[error("infeasible spec: {0}")]
    InfeasibleSpec(String),
}

fn infeasible(msg: impl Into<String>) -> FixtureError {
    FixtureError::InfeasibleSpec(msg.into())
}

/// Lowercase-alphanumeric filler of exactly `len` bytes from a seeded
/// stream.
fn filler(rng: &mut SplitMix64, len: usize) -> String {
    const ALPHABET: &[u8; 36] = b"abcdefghijklmnopqrstuvwxyz0123456789";
    let mut out = String::with_capacity(len);
    while out.len() < len {
        let mut v = rng.next_u64();
        for _ in 0..8 {
            if out.len() == len {
                break;
            }
            out.push(ALPHABET[(v % 36) as usize] as char);
            v /= 36;
        }
    }
    out
}

/// Payload for one equivalence class. Shared classes use the "shared"
/// namespace so every source referencing them produces identical bytes.
fn class_payload(seed: u64, namespace: &str, idx: u64, payload_bytes: usize) -> String {
    let prefix = format!("{namespace} {idx:08} ");
    let mut rng = SplitMix64::new(splitmix64(seed ^ fast64(namespace.as_bytes()) ^ idx));
    format!("{prefix}{}", filler(&mut rng, payload_bytes - prefix.len()))
}

fn shuffle<T>(items: &mut [T], rng: &mut SplitMix64) {
    for i in (1..items.len()).rev() {
        let j = rng.next_below(i as u64 + 1) as usize;
        items.swap(i, j);
    }
}

fn jsonl_line<T: Serialize>(value: &T) -> Vec<u8> {
    let mut line = serde_json::to_vec(value).expect("fixture serialization");
    line.push(b'\n');
    line
}

/// One source of a generated corpus: `total` passages over `unique`
/// distinct payload classes, of which the first `shared_classes` come from
/// the cross-source shared namespace.
#[derive(Debug, Clone)]
pub struct SourceSpec {
    pub label: String,
    pub total: u64,
    pub unique: u64,
    pub shared_classes: u64,
}

impl SourceSpec {
    pub fn new(label: impl Into<String>, total: u64, unique: u64) -> Self {
        Self {
            label: label.into(),
            total,
            unique,
            shared_classes: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CorpusSpec {
    pub seed: u64,
    /// Exact byte length of every payload.
    pub payload_bytes: usize,
    pub sources: Vec<SourceSpec>,
}

/// One generated JSONL stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub label: String,
    pub jsonl: Vec<u8>,
}

#[derive(Serialize)]
struct TextRecord<'a> {
    text: &'a str,
}

/// Generate one JSONL stream per source with the planted multiplicity:
/// each source's ρ is exactly total/unique; duplicates are spread
/// round-robin over the classes and the line order is shuffled
/// deterministically.
pub fn gen_corpus(spec: &CorpusSpec) -> Result<Vec<SourceFile>, FixtureError> {
    if spec.sources.is_empty() {
        return Err(infeasible("no sources"));
    }
    let mut files = Vec::with_capacity(spec.sources.len());
    for (source_idx, source) in spec.sources.iter().enumerate() {
        if source.unique > source.total {
            return Err(infeasible(format!(
                "source {}: unique {} exceeds total {}",
                source.label, source.unique, source.total
            )));
        }
        if source.unique == 0 && source.total > 0 {
            return Err(infeasible(format!(
                "source {}: {} passages over zero classes",
                source.label, source.total
            )));
        }
        if source.shared_classes > source.unique {
            return Err(infeasible(format!(
                "source {}: shared_classes {} exceeds unique {}",
                source.label, source.shared_classes, source.unique
            )));
        }
        let min_len = source.label.len().max("shared".len()) + 12;
        if spec.payload_bytes < min_len {
            return Err(infeasible(format!(
                "payload_bytes {} below minimum {min_len} for source {}",
                spec.payload_bytes, source.label
            )));
        }

        let classes: Vec<String> = (0..source.unique)
            .map(|c| {
                if c < source.shared_classes {
                    class_payload(spec.seed, "shared", c, spec.payload_bytes)
                } else {
                    class_payload(spec.seed, &source.label, c, spec.payload_bytes)
                }
            })
            .collect();

        // Every class once, then extras round-robin: planted ρ is exact.
        let mut occurrences: Vec<usize> = (0..source.unique as usize).collect();
        for extra in 0..(source.total - source.unique) {
            occurrences.push((extra % source.unique) as usize);
        }
        let mut rng = SplitMix64::new(splitmix64(
            spec.seed ^ 0x0c0b_0000 ^ (source_idx as u64) << 32,
        ));
        shuffle(&mut occurrences, &mut rng);

        let mut jsonl = Vec::new();
        for class in occurrences {
            jsonl.extend_from_slice(&jsonl_line(&TextRecord {
                text: &classes[class],
            }));
        }
        files.push(SourceFile {
            label: source.label.clone(),
            jsonl,
        });
    }
    Ok(files)
}

/// One conversation's turn structure: `turns` total turns cycling over
/// `distinct` distinct payloads (all-distinct when equal).
#[derive(Debug, Clone, Copy)]
pub struct ConversationPattern {
    pub turns: usize,
    pub distinct: usize,
}

impl ConversationPattern {
    pub fn all_distinct(turns: usize) -> Self {
        Self {
            turns,
            distinct: turns,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConversationSpec {
    pub seed: u64,
    /// Exact byte length of every turn.
    pub turn_bytes: usize,
    pub conversations: Vec<ConversationPattern>,
}

#[derive(Serialize)]
struct ConversationRecord<'a> {
    conversation_id: &'a str,
    turns: &'a [String],
}

/// Generate a conversation JSONL stream with controlled turn counts and
/// repeated-turn structure.
pub fn gen_conversations(spec: &ConversationSpec) -> Result<Vec<u8>, FixtureError> {
    if spec.turn_bytes < 24 {
        return Err(infeasible(format!(
            "turn_bytes {} below minimum 24",
            spec.turn_bytes
        )));
    }
    let mut jsonl = Vec::new();
    for (conv_idx, pattern) in spec.conversations.iter().enumerate() {
        if pattern.distinct == 0 || pattern.distinct > pattern.turns {
            return Err(infeasible(format!(
                "conversation {conv_idx}: {} distinct of {} turns",
                pattern.distinct, pattern.turns
            )));
        }
        let distinct: Vec<String> = (0..pattern.distinct)
            .map(|d| {
                let prefix = format!("c{conv_idx:04} t{d:04} ");
                let mut rng = SplitMix64::new(splitmix64(
                    spec.seed ^ 0xc034_0000 ^ ((conv_idx as u64) << 20) ^ d as u64,
                ));
                format!(
                    "{prefix}{}",
                    filler(&mut rng, spec.turn_bytes - prefix.len())
                )
            })
            .collect();
        let turns: Vec<String> = (0..pattern.turns)
            .map(|i| distinct[i % pattern.distinct].clone())
            .collect();
        let id = format!("conv-{conv_idx:04}");
        jsonl.extend_from_slice(&jsonl_line(&ConversationRecord {
            conversation_id: &id,
            turns: &turns,
        }));
    }
    Ok(jsonl)
}

/// Prompt-list generator for the exact-vs-fuzzy comparison: distinct base
/// prompts plus byte-identical copies and one-word-changed near-duplicate
/// variants.
#[derive(Debug, Clone)]
pub struct PromptSpec {
    pub seed: u64,
    pub n_base: u64,
    pub words_per_prompt: usize,
    pub exact_duplicates: u64,
    pub near_duplicates: u64,
}

pub fn gen_prompts(spec: &PromptSpec) -> Result<Vec<u8>, FixtureError> {
    if spec.n_base == 0 {
        return Err(infeasible("n_base must be positive"));
    }
    if spec.words_per_prompt < 5 {
        return Err(infeasible("words_per_prompt below minimum 5"));
    }
    let base_words = |b: u64| -> Vec<String> {
        (0..spec.words_per_prompt)
            .map(|w| format!("p{b:04}w{w:03}"))
            .collect()
    };
    let mut prompts: Vec<String> = (0..spec.n_base).map(|b| base_words(b).join(" ")).collect();
    for k in 0..spec.exact_duplicates {
        prompts.push(prompts[(k % spec.n_base) as usize].clone());
    }
    let mut rng = SplitMix64::new(splitmix64(spec.seed ^ 0x9203_0000));
    for k in 0..spec.near_duplicates {
        let base = (k * 7 + 3) % spec.n_base;
        let mut words = base_words(base);
        let victim = 1 + rng.next_below(spec.words_per_prompt as u64 - 2) as usize;
        words[victim] = format!("alt{k:05}");
        prompts.push(words.join(" "));
    }
    shuffle(&mut prompts, &mut rng);
    let mut jsonl = Vec::new();
    for text in &prompts {
        jsonl.extend_from_slice(&jsonl_line(&TextRecord { text }));
    }
    Ok(jsonl)
}

/// One vendor's planted panel composition: `n` complete 5-vote records,
/// MAT-majority records carrying the listed audit verdicts (plus
/// `unaudited_mat` MAT records with no verdict), the rest split between EQ
/// and MIN majorities. No ties are generated.
#[derive(Debug, Clone)]
pub struct PanelVendorSpec {
    pub vendor: String,
    pub n: u64,
    pub audits: Vec<AuditVerdict>,
    pub unaudited_mat: u64,
}

#[derive(Debug, Clone)]
pub struct PanelSpec {
    pub seed: u64,
    pub vendors: Vec<PanelVendorSpec>,
}

#[derive(Serialize)]
struct VerdictLine<'a> {
    question_id: &'a str,
    vendor: &'a str,
    votes: [&'a str; 5],
}

#[derive(Serialize)]
struct AuditLine<'a> {
    question_id: &'a str,
    vendor: &'a str,
    verdict: &'a str,
}

fn category_token(c: Category) -> &'static str {
    match c {
        Category::Equivalent => "EQ",
        Category::MinorDifferences => "MIN",
        Category::MateriallyDifferent => "MAT",
    }
}

fn verdict_token(v: AuditVerdict) -> &'static str {
    match v {
        AuditVerdict::TrulyWrong => "truly_wrong",
        AuditVerdict::JudgesOverflag => "judges_overflag",
        AuditVerdict::DedupBetter => "dedup_better",
        AuditVerdict::BadQuestion => "bad_question",
        AuditVerdict::Uncertain => "uncertain",
    }
}

/// Generate a verdict JSONL stream plus the matching audit-file JSONL
/// (question_id/vendor/verdict triplets for the audited MAT records).
pub fn gen_verdicts(spec: &PanelSpec) -> Result<(Vec<u8>, Vec<u8>), FixtureError> {
    use Category::*;
    let mut verdicts = Vec::new();
    let mut audits = Vec::new();
    for vendor in &spec.vendors {
        let mat_total = vendor.audits.len() as u64 + vendor.unaudited_mat;
        if mat_total > vendor.n {
            return Err(infeasible(format!(
                "vendor {}: {mat_total} MAT records exceed n {}",
                vendor.vendor, vendor.n
            )));
        }
        // Spread MAT records evenly over the question ids.
        let mat_positions: Vec<u64> = (0..mat_total)
            .map(|i| i * vendor.n / mat_total.max(1))
            .collect();
        let mut rng = SplitMix64::new(splitmix64(
            spec.seed ^ 0x7a9e_0000 ^ fast64(vendor.vendor.as_bytes()),
        ));
        let mut mat_seen = 0usize;
        for q in 0..vendor.n {
            let question_id = format!("q{q:04}");
            let is_mat = mat_positions.contains(&q);
            let votes: [Category; 5] = if is_mat {
                match rng.next_below(3) {
                    0 => [
                        MateriallyDifferent,
                        MateriallyDifferent,
                        MateriallyDifferent,
                        Equivalent,
                        MinorDifferences,
                    ],
                    1 => [
                        MateriallyDifferent,
                        MateriallyDifferent,
                        MateriallyDifferent,
                        MateriallyDifferent,
                        Equivalent,
                    ],
                    _ => [
                        MateriallyDifferent,
                        MateriallyDifferent,
                        MateriallyDifferent,
                        MinorDifferences,
                        MinorDifferences,
                    ],
                }
            } else {
                match rng.next_below(10) {
                    0 => [
                        MinorDifferences,
                        MinorDifferences,
                        MinorDifferences,
                        Equivalent,
                        Equivalent,
                    ],
                    1 | 2 => [
                        Equivalent,
                        Equivalent,
                        Equivalent,
                        MinorDifferences,
                        MinorDifferences,
                    ],
                    3 => [
                        Equivalent,
                        Equivalent,
                        Equivalent,
                        Equivalent,
                        MinorDifferences,
                    ],
                    _ => [Equivalent; 5],
                }
            };
            let tokens = votes.map(category_token);
            verdicts.extend_from_slice(&jsonl_line(&VerdictLine {
                question_id: &question_id,
                vendor: &vendor.vendor,
                votes: tokens,
            }));
            if is_mat {
                if let Some(&verdict) = vendor.audits.get(mat_seen) {
                    audits.extend_from_slice(&jsonl_line(&AuditLine {
                        question_id: &question_id,
                        vendor: &vendor.vendor,
                        verdict: verdict_token(verdict),
                    }));
                }
                mat_seen += 1;
            }
        }
    }
    Ok((verdicts, audits))
}
