//! Byte-exact membership sets keyed by the fast 64-bit digest with full
//! byte confirmation inside each bucket. A payload is never considered seen
//! on hash equality alone.
//!
//! Memory is O(distinct payload bytes + bucket overhead), not O(stream
//! bytes): duplicates are discarded on arrival, distinct payloads are
//! retained for confirmation.

use crate::dedup::fast64;
use dashmap::DashMap;
use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

/// Single-writer membership set.
#[derive(Debug, Default)]
pub struct ByteSet {
    buckets: HashMap<u64, Vec<Box<[u8]>>>,
    len: u64,
}

impl ByteSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert `payload` if it has not been seen. Returns true on first
    /// occurrence.
    pub fn insert_if_absent(&mut self, payload: &[u8]) -> bool {
        let bucket = self.buckets.entry(fast64(payload)).or_default();
        if bucket.iter().any(|p| p.as_ref() == payload) {
            return false;
        }
        bucket.push(payload.to_vec().into_boxed_slice());
        self.len += 1;
        true
    }

    pub fn contains(&self, payload: &[u8]) -> bool {
        self.buckets
            .get(&fast64(payload))
            .is_some_and(|b| b.iter().any(|p| p.as_ref() == payload))
    }

    /// Number of distinct payloads seen.
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Concurrent membership set with linearizable first-wins insert-if-absent.
/// Insertions for payloads sharing a digest serialize on that bucket's shard
/// lock; distinct digests do not contend.
#[derive(Debug, Default)]
pub struct ConcurrentByteSet {
    buckets: DashMap<u64, Vec<Box<[u8]>>>,
    len: AtomicU64,
}

impl ConcurrentByteSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns true iff this call was the first to insert `payload`.
    pub fn insert_if_absent(&self, payload: &[u8]) -> bool {
        let mut bucket = self.buckets.entry(fast64(payload)).or_default();
        if bucket.iter().any(|p| p.as_ref() == payload) {
            return false;
        }
        bucket.push(payload.to_vec().into_boxed_slice());
        self.len.fetch_add(1, Ordering::Relaxed);
        true
    }

    pub fn contains(&self, payload: &[u8]) -> bool {
        self.buckets
            .get(&fast64(payload))
            .is_some_and(|b| b.iter().any(|p| p.as_ref() == payload))
    }

    pub fn len(&self) -> u64 {
        self.len.load(Ordering::Relaxed)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
