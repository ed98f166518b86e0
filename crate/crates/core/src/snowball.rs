//! Cumulative multi-turn history measurement and the stateful proxy cache.
//!
//! Under cumulative-history sending, snapshot i of a conversation is the
//! concatenation of turns 1..i, so raw traffic grows quadratically in the
//! turn count while distinct content grows linearly. Measurement here is
//! snapshot-by-snapshot: raw bytes sum every snapshot, dedup bytes count
//! each distinct turn once at first appearance.
//!
//! Accounting conventions:
//! * Turn granularity is the whole message payload, role prefix bytes
//!   included; identical payloads dedup across role boundaries.
//! * Snapshots concatenate turn bytes with no separator.
//! * Token counts are per-turn (each turn tokenized independently, snapshot
//!   totals sum per-turn counts), so token and byte accounting follow the
//!   same snapshot arithmetic.

use crate::membership::ByteSet;
use crate::metrics::{approx_token_count, summarize, DistributionSummary, ReductionStats};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::BufRead;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SnowballError {
    #[error("conversation {0} has fewer than 2 turns")]
    Skipped(String),
}

/// One conversation: ordered turns, each the exact bytes of a message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conversation {
    pub id: String,
    pub turns: Vec<Vec<u8>>,
}

/// Per-conversation measurement row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationRow {
    pub id: String,
    pub turn_count: usize,
    pub raw_bytes: u64,
    pub dedup_bytes: u64,
    pub raw_tokens: u64,
    pub dedup_tokens: u64,
    pub byte_reduction_pct: f64,
    pub token_reduction_pct: f64,
}

/// Turn-count buckets, in report order.
pub const BUCKET_LABELS: [&str; 5] = ["2-4", "5-9", "10-19", "20-49", "50+"];

pub fn bucket_label(turn_count: usize) -> &'static str {
    match turn_count {
        0..=4 => "2-4", // 0/1-turn conversations are skipped upstream
        5..=9 => "5-9",
        10..=19 => "10-19",
        20..=49 => "20-49",
        _ => "50+",
    }
}

/// Measure one conversation snapshot-by-snapshot.
///
/// raw = Σ_{i=1..N} bytes(snapshot_i) with snapshot_i = turns 1..i
/// concatenated; dedup counts each distinct turn once, at its first
/// appearance. Conversations with fewer than two turns are skipped.
pub fn snowball_measure(conv: &Conversation) -> Result<ConversationRow, SnowballError> {
    if conv.turns.len() < 2 {
        return Err(SnowballError::Skipped(conv.id.clone()));
    }
    let n = conv.turns.len() as u64;
    let mut raw_bytes = 0u64;
    let mut dedup_bytes = 0u64;
    let mut raw_tokens = 0u64;
    let mut dedup_tokens = 0u64;
    let mut seen = ByteSet::new();
    for (i, turn) in conv.turns.iter().enumerate() {
        let bytes = turn.len() as u64;
        let tokens = approx_token_count(turn);
        // This turn appears in snapshots i+1 ..= N.
        let snapshots = n - i as u64;
        raw_bytes += bytes * snapshots;
        raw_tokens += tokens * snapshots;
        if seen.insert_if_absent(turn) {
            dedup_bytes += bytes;
            dedup_tokens += tokens;
        }
    }
    let pct = |raw: u64, dedup: u64| {
        if raw == 0 {
            0.0
        } else {
            100.0 * (1.0 - dedup as f64 / raw as f64)
        }
    };
    Ok(ConversationRow {
        id: conv.id.clone(),
        turn_count: conv.turns.len(),
        raw_bytes,
        dedup_bytes,
        raw_tokens,
        dedup_tokens,
        byte_reduction_pct: pct(raw_bytes, dedup_bytes),
        token_reduction_pct: pct(raw_tokens, dedup_tokens),
    })
}

/// One turn-range bucket's token-reduction summary; `summary` is None when
/// the bucket is empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketRow {
    pub label: String,
    pub n: usize,
    pub summary: Option<DistributionSummary>,
}

/// Assign rows to turn-range buckets and summarize token reduction per
/// bucket. All five buckets are always present, in canonical order.
pub fn bucket_reports(rows: &[ConversationRow]) -> Vec<BucketRow> {
    let mut grouped: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for row in rows {
        grouped
            .entry(bucket_label(row.turn_count))
            .or_default()
            .push(row.token_reduction_pct);
    }
    BUCKET_LABELS
        .iter()
        .map(|&label| {
            let samples = grouped.get(label).map(Vec::as_slice).unwrap_or(&[]);
            BucketRow {
                label: label.to_string(),
                n: samples.len(),
                summary: summarize(samples),
            }
        })
        .collect()
}

/// Full snowball report over a conversation set.
#[derive(Debug, Clone, Serialize)]
pub struct SnowballReport {
    pub per_conversation: Vec<ConversationRow>,
    /// Items are turn instances summed over snapshots (N(N+1)/2 per
    /// conversation) against distinct turns.
    pub aggregate: ReductionStats,
    pub buckets: Vec<BucketRow>,
    pub skipped: u64,
}

/// Measure every conversation; single-turn conversations are counted as
/// skipped, not errors.
pub fn measure_all(conversations: &[Conversation]) -> SnowballReport {
    let mut per_conversation = Vec::new();
    let mut skipped = 0u64;
    let mut total_items = 0u64;
    let mut unique_items = 0u64;
    let mut raw_bytes = 0u64;
    let mut dedup_bytes = 0u64;
    let mut raw_tokens = 0u64;
    let mut dedup_tokens = 0u64;
    for conv in conversations {
        match snowball_measure(conv) {
            Ok(row) => {
                let n = conv.turns.len() as u64;
                total_items += n * (n + 1) / 2;
                let mut seen = ByteSet::new();
                unique_items += conv
                    .turns
                    .iter()
                    .filter(|t| seen.insert_if_absent(t))
                    .count() as u64;
                raw_bytes += row.raw_bytes;
                dedup_bytes += row.dedup_bytes;
                raw_tokens += row.raw_tokens;
                dedup_tokens += row.dedup_tokens;
                per_conversation.push(row);
            }
            Err(SnowballError::Skipped(_)) => skipped += 1,
        }
    }
    let buckets = bucket_reports(&per_conversation);
    SnowballReport {
        per_conversation,
        aggregate: ReductionStats::compute(
            total_items,
            unique_items,
            raw_bytes,
            dedup_bytes,
            raw_tokens,
            dedup_tokens,
        ),
        buckets,
        skipped,
    }
}

/// Stateful proxy session: caches turn payloads and forwards only unseen
/// content. Single-writer per session.
#[derive(Debug)]
pub struct ProxySession {
    pub id: String,
    seen: ByteSet,
    pub sent_unique_bytes: u64,
    pub sent_raw_equivalent_bytes: u64,
}

impl ProxySession {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            seen: ByteSet::new(),
            sent_unique_bytes: 0,
            sent_raw_equivalent_bytes: 0,
        }
    }

    /// Forward the unseen turns of a full cumulative-history snapshot, in
    /// order. Counters track what naive cumulative sending would have
    /// transmitted versus what the proxy actually sent.
    pub fn send(&mut self, snapshot: &[Vec<u8>]) -> Vec<Vec<u8>> {
        let mut delta = Vec::new();
        for turn in snapshot {
            self.sent_raw_equivalent_bytes += turn.len() as u64;
            if self.seen.insert_if_absent(turn) {
                self.sent_unique_bytes += turn.len() as u64;
                delta.push(turn.clone());
            }
        }
        delta
    }

    pub fn distinct_turns(&self) -> u64 {
        self.seen.len()
    }
}

/// Field mapping for conversation JSONL ingestion. Defaults match a
/// `{"conversation_id": ..., "turns": [...]}` layout; chat-transcript
/// exports with role/content objects serialize each turn as
/// `"{role}: {content}"` bytes.
#[derive(Debug, Clone)]
pub struct ConversationMapping {
    pub id_field: String,
    pub turns_field: String,
    pub role_field: String,
    pub content_field: String,
}

impl Default for ConversationMapping {
    fn default() -> Self {
        Self {
            id_field: "conversation_id".into(),
            turns_field: "turns".into(),
            role_field: "role".into(),
            content_field: "content".into(),
        }
    }
}

/// Outcome of loading a conversation JSONL stream.
#[derive(Debug, Default)]
pub struct ConversationLoad {
    pub conversations: Vec<Conversation>,
    pub malformed: u64,
}

/// Load conversations from JSONL. Lines that are not JSON objects, lack the
/// turns array, or contain non-convertible turn entries are counted
/// malformed and skipped. A missing id falls back to the line number.
pub fn load_conversations<R: BufRead>(
    reader: R,
    mapping: &ConversationMapping,
) -> std::io::Result<ConversationLoad> {
    let mut out = ConversationLoad::default();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let Ok(value) = serde_json::from_str::<serde_json::Value>(&line) else {
            out.malformed += 1;
            continue;
        };
        let Some(turn_values) = value.get(&mapping.turns_field).and_then(|v| v.as_array()) else {
            out.malformed += 1;
            continue;
        };
        let mut turns = Vec::with_capacity(turn_values.len());
        let mut ok = true;
        for turn in turn_values {
            if let Some(text) = turn.as_str() {
                turns.push(text.as_bytes().to_vec());
            } else if let Some(obj) = turn.as_object() {
                let role = obj.get(&mapping.role_field).and_then(|v| v.as_str());
                let content = obj.get(&mapping.content_field).and_then(|v| v.as_str());
                match (role, content) {
                    (Some(role), Some(content)) => {
                        turns.push(format!("{role}: {content}").into_bytes())
                    }
                    (None, Some(content)) => turns.push(content.as_bytes().to_vec()),
                    _ => {
                        ok = false;
                        break;
                    }
                }
            } else {
                ok = false;
                break;
            }
        }
        if !ok {
            out.malformed += 1;
            continue;
        }
        let id = value
            .get(&mapping.id_field)
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .unwrap_or_else(|| format!("line-{}", lineno + 1));
        out.conversations.push(Conversation { id, turns });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv(id: &str, turns: &[&[u8]]) -> Conversation {
        Conversation {
            id: id.into(),
            turns: turns.iter().map(|t| t.to_vec()).collect(),
        }
    }

    #[test]
    fn three_distinct_equal_turns() {
        // raw = 10+20+30 = 60, dedup = 30, reduction 50% = 1 − 2/(N+1).
        let c = conv("c", &[b"aaaaaaaaaa", b"bbbbbbbbbb", b"cccccccccc"]);
        let row = snowball_measure(&c).unwrap();
        assert_eq!(row.raw_bytes, 60);
        assert_eq!(row.dedup_bytes, 30);
        assert_eq!(row.byte_reduction_pct, 50.0);
    }

    #[test]
    fn two_identical_turns() {
        // raw = b + 2b = 3b, dedup = b, reduction 66.67%.
        let c = conv("c", &[b"dup-turn", b"dup-turn"]);
        let row = snowball_measure(&c).unwrap();
        assert_eq!(row.raw_bytes, 24);
        assert_eq!(row.dedup_bytes, 8);
        assert_eq!(format!("{:.2}", row.byte_reduction_pct), "66.67");
    }

    #[test]
    fn closed_form_verified_by_snapshot_enumeration() {
        for n in 2..=20usize {
            let turns: Vec<Vec<u8>> = (0..n)
                .map(|i| format!("turn-{i:03}x").into_bytes())
                .collect();
            let c = Conversation {
                id: "e".into(),
                turns: turns.clone(),
            };
            let row = snowball_measure(&c).unwrap();

            // Brute-force enumeration: materialize every snapshot.
            let mut raw = 0u64;
            for i in 1..=n {
                let snapshot: Vec<u8> = turns[..i].concat();
                raw += snapshot.len() as u64;
            }
            assert_eq!(row.raw_bytes, raw);
            let expected = 100.0 * (1.0 - 2.0 / (n as f64 + 1.0));
            assert_eq!(row.byte_reduction_pct, expected, "n={n}");
        }
    }

    #[test]
    fn single_turn_is_skipped() {
        let c = conv("solo", &[b"only"]);
        assert_eq!(
            snowball_measure(&c),
            Err(SnowballError::Skipped("solo".into()))
        );
        let report = measure_all(&[c, conv("pair", &[b"a", b"b"])]);
        assert_eq!(report.skipped, 1);
        assert_eq!(report.per_conversation.len(), 1);
    }

    #[test]
    fn bucket_boundaries() {
        assert_eq!(bucket_label(2), "2-4");
        assert_eq!(bucket_label(4), "2-4");
        assert_eq!(bucket_label(5), "5-9");
        assert_eq!(bucket_label(19), "10-19");
        assert_eq!(bucket_label(49), "20-49");
        assert_eq!(bucket_label(50), "50+");
        assert_eq!(bucket_label(500), "50+");

        let rows: Vec<ConversationRow> = [2usize, 4]
            .iter()
            .map(|&n| {
                let turns: Vec<Vec<u8>> = (0..n).map(|i| format!("t{i}").into_bytes()).collect();
                snowball_measure(&Conversation {
                    id: n.to_string(),
                    turns,
                })
                .unwrap()
            })
            .collect();
        let buckets = bucket_reports(&rows);
        assert_eq!(buckets[0].label, "2-4");
        assert_eq!(buckets[0].n, 2);
        assert!(buckets[1].summary.is_none()); // empty bucket marker
        assert_eq!(buckets.len(), 5);
    }

    #[test]
    fn proxy_sends_only_unseen_turns() {
        let mut session = ProxySession::new("s1");
        let t1 = b"first turn".to_vec();
        let t2 = b"second turn".to_vec();

        let delta = session.send(std::slice::from_ref(&t1));
        assert_eq!(delta, vec![t1.clone()]);

        let delta = session.send(&[t1.clone(), t2.clone()]);
        assert_eq!(delta, vec![t2.clone()]);

        assert_eq!(session.sent_unique_bytes, (t1.len() + t2.len()) as u64);
        assert_eq!(
            session.sent_raw_equivalent_bytes,
            (t1.len() * 2 + t2.len()) as u64
        );
    }

    #[test]
    fn proxy_equal_turn_ratio_closed_form() {
        // N-step session, equal-length distinct turns:
        // unique/raw = 2/(N+1) and raw/unique = (N+1)/2 exactly.
        for n in [2usize, 5, 16, 33] {
            let turns: Vec<Vec<u8>> = (0..n)
                .map(|i| format!("turn {i:04}").into_bytes())
                .collect();
            let mut session = ProxySession::new("ratio");
            for i in 1..=n {
                session.send(&turns[..i]);
            }
            assert_eq!(
                session.sent_unique_bytes as f64 / session.sent_raw_equivalent_bytes as f64,
                2.0 / (n as f64 + 1.0)
            );
            assert_eq!(
                session.sent_raw_equivalent_bytes * 2,
                session.sent_unique_bytes * (n as u64 + 1)
            );
        }
    }

    #[test]
    fn proxy_deltas_concatenate_to_distinct_turns() {
        // Repeated turns across snapshots, including within-snapshot dups.
        let turns: Vec<Vec<u8>> = vec![
            b"alpha".to_vec(),
            b"beta".to_vec(),
            b"alpha".to_vec(),
            b"gamma".to_vec(),
            b"beta".to_vec(),
        ];
        let mut session = ProxySession::new("cat");
        let mut concat_deltas = Vec::new();
        for i in 1..=turns.len() {
            for turn in session.send(&turns[..i]) {
                concat_deltas.extend_from_slice(&turn);
            }
        }
        // First-seen order distinct turns.
        let mut seen = ByteSet::new();
        let mut concat_distinct = Vec::new();
        for turn in &turns {
            if seen.insert_if_absent(turn) {
                concat_distinct.extend_from_slice(turn);
            }
        }
        assert_eq!(concat_deltas, concat_distinct);
        assert_eq!(session.distinct_turns(), 3);
    }

    #[test]
    fn turns_dedup_across_role_boundaries() {
        let c = conv("roles", &[b"user: hi", b"assistant: hi", b"user: hi"]);
        let row = snowball_measure(&c).unwrap();
        assert_eq!(
            row.dedup_bytes,
            (b"user: hi".len() + b"assistant: hi".len()) as u64
        );
    }

    #[test]
    fn load_conversations_mappings() {
        let jsonl = concat!(
            r#"{"conversation_id":"c1","turns":["a","b"]}"#,
            "\n",
            r#"{"turns":[{"role":"user","content":"hi"},{"role":"assistant","content":"hello"}]}"#,
            "\n",
            r#"{"turns":"not an array"}"#,
            "\n",
            "garbage\n",
        );
        let load = load_conversations(jsonl.as_bytes(), &ConversationMapping::default()).unwrap();
        assert_eq!(load.conversations.len(), 2);
        assert_eq!(load.malformed, 2);
        assert_eq!(load.conversations[0].id, "c1");
        assert_eq!(load.conversations[0].turns[0], b"a");
        assert_eq!(load.conversations[1].id, "line-2");
        assert_eq!(load.conversations[1].turns[0], b"user: hi");
    }
}
