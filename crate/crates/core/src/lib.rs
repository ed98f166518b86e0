//! Byte-exact chunk-level deduplication engine and redundancy measurement
//! harness for retrieval-augmented generation pipelines.
//!
//! The crate is organized around one primitive and three measurement regimes:
//!
//! * [`dedup`] — the byte-exact equivalence relation over chunk multisets,
//!   canonical representative selection, fingerprinting, and an independent
//!   oracle verifier.
//! * [`corpus`] — corpus-level JSONL ingestion and aggregation with
//!   per-source breakdowns, cross-source Jaccard, and audit trails.
//! * [`retriever`] — a minimal BM25 retriever plus per-query dedup
//!   statistics and the duplicate-multiplicity-factor construction.
//! * [`snowball`] — snapshot-by-snapshot dedup of cumulative multi-turn
//!   chat histories, turn-count bucketing, and the stateful proxy cache.
//! * [`minhash`] — MinHash-LSH approximate near-duplicate baseline with an
//!   exact-Jaccard oracle.
//! * [`stats`] — Wilson upper bounds, Fleiss/Cohen kappa, panel-majority
//!   tabulation, and the five-category audit adjustment.
//! * [`stream`] — inline newline-delimited streaming filter, standard-stream
//!   and TCP server modes.
//! * [`fixtures`] — seeded synthetic-corpus generators so every check runs
//!   offline.

pub mod corpus;
pub mod dedup;
pub mod fixtures;
pub mod membership;
pub mod metrics;
pub mod minhash;
pub mod prng;
pub mod retriever;
pub mod snowball;
pub mod stats;
pub mod stream;
