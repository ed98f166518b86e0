#![allow(dead_code)] // each test target uses a subset of these specs

//! Shared fixture specs: the single source of truth for what ships under
//! fixtures/ at the workspace root. The shipped files are generated from
//! these specs (see the shipped_fixtures test) and the acceptance suite
//! reads them back, so planted values stay in one place.

use chunkdedup_core::fixtures::{
    gen_conversations, gen_corpus, gen_prompts, gen_verdicts, ConversationPattern,
    ConversationSpec, CorpusSpec, PanelSpec, PanelVendorSpec, PromptSpec, SourceSpec,
};
use chunkdedup_core::prng::SplitMix64;
use chunkdedup_core::stats::AuditVerdict;
use std::path::{Path, PathBuf};

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// The 1,526-passage versioned-corpus shape: three sources, 1,383 unique
/// overall, ρ = 1.1034, item/byte reduction 9.3709%.
pub fn corpus_versioned_spec() -> CorpusSpec {
    CorpusSpec {
        seed: 0x1526,
        payload_bytes: 120,
        sources: vec![
            SourceSpec::new("wiki", 247, 143),
            SourceSpec::new("arxiv", 51, 35),
            SourceSpec::new("qa", 1228, 1205),
        ],
    }
}

/// Three equal-size sources planting per-source reductions of exactly
/// 42.10%, 31.40%, and 19.80%.
pub fn corpus_targets_spec() -> CorpusSpec {
    CorpusSpec {
        seed: 0x7a26,
        payload_bytes: 96,
        sources: vec![
            SourceSpec::new("wiki", 1000, 579),
            SourceSpec::new("arxiv", 1000, 686),
            SourceSpec::new("qa", 1000, 802),
        ],
    }
}

/// Two sources with 20 payload classes planted in both, plus internal
/// duplicates, for cross-source Jaccard checks.
pub fn corpus_shared_spec() -> CorpusSpec {
    CorpusSpec {
        seed: 0x54a2,
        payload_bytes: 80,
        sources: vec![
            SourceSpec {
                label: "news".into(),
                total: 100,
                unique: 80,
                shared_classes: 20,
            },
            SourceSpec {
                label: "web".into(),
                total: 120,
                unique: 90,
                shared_classes: 20,
            },
        ],
    }
}

/// The shipped 20-conversation fixture: turn counts covering all five
/// buckets, mostly all-distinct turns plus two conversations with repeats.
pub fn conversations_spec() -> ConversationSpec {
    let mut conversations: Vec<ConversationPattern> = [
        2usize, 3, 4, 4, 5, 6, 8, 9, 10, 12, 16, 19, 20, 28, 40, 49, 50, 55, 60, 64,
    ]
    .into_iter()
    .map(ConversationPattern::all_distinct)
    .collect();
    conversations[3] = ConversationPattern {
        turns: 4,
        distinct: 3,
    };
    conversations[9] = ConversationPattern {
        turns: 12,
        distinct: 9,
    };
    ConversationSpec {
        seed: 0xc0a7,
        turn_bytes: 48,
        conversations,
    }
}

/// 400 prompts: 300 distinct bases, 40 byte-identical copies, 60 one-word
/// near-duplicate variants. At 60 words per prompt a one-word change moves
/// 3 of 58 shingles, leaving the variant at exact Jaccard 55/61 ≈ 0.902 —
/// just above the 0.9 confirmation threshold.
pub fn prompts_spec() -> PromptSpec {
    PromptSpec {
        seed: 0x9306,
        n_base: 300,
        words_per_prompt: 60,
        exact_duplicates: 40,
        near_duplicates: 60,
    }
}

/// Clean-regime panel fixture, n = 400 per vendor. Planted audit verdicts
/// reproduce the published post-audit cells: 1/400 → 1.40%, 4/399 → 2.55%,
/// 6/399 → 3.24%, 6/398 → 3.25%.
pub fn verdicts_clean_spec() -> PanelSpec {
    use AuditVerdict::*;
    PanelSpec {
        seed: 0xc1ea,
        vendors: vec![
            PanelVendorSpec {
                vendor: "vendor-a".into(),
                n: 400,
                audits: vec![
                    JudgesOverflag,
                    JudgesOverflag,
                    JudgesOverflag,
                    JudgesOverflag,
                    DedupBetter,
                    DedupBetter,
                    TrulyWrong,
                ],
                unaudited_mat: 0,
            },
            PanelVendorSpec {
                vendor: "vendor-b".into(),
                n: 400,
                audits: vec![
                    JudgesOverflag,
                    BadQuestion,
                    TrulyWrong,
                    TrulyWrong,
                    TrulyWrong,
                    TrulyWrong,
                ],
                unaudited_mat: 0,
            },
            PanelVendorSpec {
                vendor: "vendor-c".into(),
                n: 400,
                audits: vec![
                    JudgesOverflag,
                    JudgesOverflag,
                    JudgesOverflag,
                    JudgesOverflag,
                    BadQuestion,
                    TrulyWrong,
                    TrulyWrong,
                    TrulyWrong,
                    TrulyWrong,
                    TrulyWrong,
                    TrulyWrong,
                ],
                unaudited_mat: 0,
            },
            PanelVendorSpec {
                vendor: "vendor-d".into(),
                n: 400,
                audits: vec![
                    JudgesOverflag,
                    JudgesOverflag,
                    JudgesOverflag,
                    JudgesOverflag,
                    JudgesOverflag,
                    JudgesOverflag,
                    JudgesOverflag,
                    JudgesOverflag,
                    DedupBetter,
                    DedupBetter,
                    BadQuestion,
                    BadQuestion,
                    TrulyWrong,
                    TrulyWrong,
                    TrulyWrong,
                    TrulyWrong,
                    TrulyWrong,
                    TrulyWrong,
                ],
                unaudited_mat: 0,
            },
        ],
    }
}

/// High-redundancy-regime panel fixture, n = 200 per vendor. Post-audit
/// cells: 3/199 → 4.34%, 1/200 → 2.78%, 0/198 → 1.90%, 2/198 → 3.61%;
/// pre-audit 6/200 → 6.39%, 4/200 → 5.03%, 7/200 → 7.05%.
pub fn verdicts_highred_spec() -> PanelSpec {
    use AuditVerdict::*;
    PanelSpec {
        seed: 0x44ed,
        vendors: vec![
            PanelVendorSpec {
                vendor: "vendor-a".into(),
                n: 200,
                audits: vec![
                    JudgesOverflag,
                    JudgesOverflag,
                    JudgesOverflag,
                    DedupBetter,
                    DedupBetter,
                    TrulyWrong,
                ],
                unaudited_mat: 0,
            },
            PanelVendorSpec {
                vendor: "vendor-b".into(),
                n: 200,
                audits: vec![
                    JudgesOverflag,
                    JudgesOverflag,
                    JudgesOverflag,
                    BadQuestion,
                    BadQuestion,
                    TrulyWrong,
                    Uncertain,
                ],
                unaudited_mat: 0,
            },
            PanelVendorSpec {
                vendor: "vendor-c".into(),
                n: 200,
                audits: vec![
                    JudgesOverflag,
                    JudgesOverflag,
                    BadQuestion,
                    TrulyWrong,
                    TrulyWrong,
                    Uncertain,
                ],
                unaudited_mat: 0,
            },
            PanelVendorSpec {
                vendor: "vendor-d".into(),
                n: 200,
                audits: vec![JudgesOverflag, JudgesOverflag, BadQuestion, BadQuestion],
                unaudited_mat: 0,
            },
        ],
    }
}

/// 200 globally-distinct passages and 50 queries for the retrieval bench.
/// Every passage carries a unique id token, so the corpus is distinct by
/// construction.
pub fn retrieval_fixture() -> (Vec<u8>, String) {
    let mut rng = SplitMix64::new(0xbe25);
    let vocab: Vec<String> = (0..120).map(|i| format!("term{i:03}")).collect();
    let mut passages = Vec::new();
    for doc in 0..200 {
        let len = 8 + rng.next_below(20) as usize;
        let mut words: Vec<String> = (0..len)
            .map(|_| vocab[rng.next_below(120) as usize].clone())
            .collect();
        words.push(format!("docid{doc:03}"));
        let record = serde_json::json!({ "text": words.join(" ") });
        passages.extend_from_slice(serde_json::to_string(&record).unwrap().as_bytes());
        passages.push(b'\n');
    }
    let mut queries = String::new();
    for q in 0..50 {
        let len = 2 + rng.next_below(3) as usize;
        let mut words: Vec<String> = (0..len)
            .map(|_| vocab[rng.next_below(120) as usize].clone())
            .collect();
        if q % 10 == 0 {
            words.push(format!("docid{:03}", rng.next_below(200)));
        }
        queries.push_str(&words.join(" "));
        queries.push('\n');
    }
    (passages, queries)
}

/// Every shipped fixture file, as (path relative to fixtures/, bytes).
pub fn all_fixture_files() -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    for (dir, spec) in [
        ("corpus_versioned", corpus_versioned_spec()),
        ("corpus_targets", corpus_targets_spec()),
        ("corpus_shared", corpus_shared_spec()),
    ] {
        for file in gen_corpus(&spec).expect("fixture spec") {
            files.push((
                PathBuf::from(dir).join(format!("{}.jsonl", file.label)),
                file.jsonl,
            ));
        }
    }
    files.push((
        PathBuf::from("conversations.jsonl"),
        gen_conversations(&conversations_spec()).expect("fixture spec"),
    ));
    files.push((
        PathBuf::from("prompts.jsonl"),
        gen_prompts(&prompts_spec()).expect("fixture spec"),
    ));
    let (verdicts, audits) = gen_verdicts(&verdicts_clean_spec()).expect("fixture spec");
    files.push((PathBuf::from("verdicts_clean.jsonl"), verdicts));
    files.push((PathBuf::from("audits_clean.jsonl"), audits));
    let (verdicts, audits) = gen_verdicts(&verdicts_highred_spec()).expect("fixture spec");
    files.push((PathBuf::from("verdicts_highred.jsonl"), verdicts));
    files.push((PathBuf::from("audits_highred.jsonl"), audits));
    let (passages, queries) = retrieval_fixture();
    files.push((PathBuf::from("retrieval/passages.jsonl"), passages));
    files.push((PathBuf::from("retrieval/queries.txt"), queries.into_bytes()));
    files
}
