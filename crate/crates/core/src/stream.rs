//! Inline streaming byte-exact filter over newline-delimited records, in
//! standard-stream mode and TCP server mode.
//!
//! Framing: the record delimiter is a single newline byte; a record is the
//! exact bytes between delimiters. Blank lines are legal records and dedup
//! as one class. Bytes after the last delimiter at EOF still form a record
//! but are counted in `malformed` (unterminated frame). `bytes_in` and
//! `bytes_out` count record payload bytes; framing newlines are excluded
//! from both.
//!
//! The first occurrence of each record is forwarded verbatim in arrival
//! order; later byte-identical records are dropped. GLOBAL server scope
//! shares one membership structure across connections with linearizable
//! first-wins inserts and has no eviction: memory grows with the distinct
//! payload bytes seen over the server's lifetime.

use crate::membership::{ByteSet, ConcurrentByteSet};
use serde::Serialize;
use std::io::{BufRead, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Instant;

/// Power-of-two microsecond latency histogram: bucket 0 counts 0 µs,
/// bucket i ≥ 1 counts latencies in [2^(i−1), 2^i) µs; the last bucket
/// absorbs overflow.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LatencyHistogram {
    pub buckets: [u64; 22],
}

impl LatencyHistogram {
    pub fn record(&mut self, micros: u64) {
        let idx = if micros == 0 {
            0
        } else {
            (64 - micros.leading_zeros() as usize).min(21)
        };
        self.buckets[idx] += 1;
    }

    pub fn count(&self) -> u64 {
        self.buckets.iter().sum()
    }

    /// Inclusive upper bound of the bucket containing the median sample;
    /// `None` when empty.
    pub fn median_upper_bound_micros(&self) -> Option<u64> {
        let total = self.count();
        if total == 0 {
            return None;
        }
        let target = total.div_ceil(2);
        let mut seen = 0;
        for (idx, &count) in self.buckets.iter().enumerate() {
            seen += count;
            if seen >= target {
                return Some(if idx == 0 { 0 } else { (1u64 << idx) - 1 });
            }
        }
        None
    }
}

/// Counters for one filtered stream.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StreamStats {
    pub records_in: u64,
    pub records_out: u64,
    pub bytes_in: u64,
    pub bytes_out: u64,
    /// Frames not terminated by the delimiter at EOF (still processed).
    pub malformed: u64,
    pub wall_time_micros: u64,
    pub latency_histogram: LatencyHistogram,
}

/// Membership scope for a filtered stream.
pub trait Membership {
    /// True iff this payload has not been seen in the scope.
    fn insert_first(&mut self, payload: &[u8]) -> bool;
}

impl Membership for ByteSet {
    fn insert_first(&mut self, payload: &[u8]) -> bool {
        self.insert_if_absent(payload)
    }
}

impl Membership for &ConcurrentByteSet {
    fn insert_first(&mut self, payload: &[u8]) -> bool {
        self.insert_if_absent(payload)
    }
}

/// Filter one newline-delimited stream: forward first occurrences verbatim,
/// drop later byte-identical records, return counters at EOF.
pub fn filter_stream<R: BufRead, W: Write>(
    mut input: R,
    mut output: W,
    membership: &mut impl Membership,
) -> std::io::Result<StreamStats> {
    let started = Instant::now();
    let mut stats = StreamStats::default();
    let mut record = Vec::new();
    loop {
        record.clear();
        let read = input.read_until(b'\n', &mut record)?;
        if read == 0 {
            break;
        }
        let terminated = record.last() == Some(&b'\n');
        let payload: &[u8] = if terminated {
            &record[..record.len() - 1]
        } else {
            stats.malformed += 1;
            &record
        };

        let record_started = Instant::now();
        stats.records_in += 1;
        stats.bytes_in += payload.len() as u64;
        if membership.insert_first(payload) {
            output.write_all(payload)?;
            output.write_all(b"\n")?;
            stats.records_out += 1;
            stats.bytes_out += payload.len() as u64;
        }
        stats
            .latency_histogram
            .record(record_started.elapsed().as_micros() as u64);
    }
    output.flush()?;
    stats.wall_time_micros = started.elapsed().as_micros() as u64;
    Ok(stats)
}

/// Membership scope of a server.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServeScope {
    /// Each connection starts with empty membership state.
    PerConnection,
    /// One shared membership structure across all connections.
    Global,
}

/// Where per-connection stats frames go (one JSON line per connection at
/// stream end, never interleaved with payload).
pub type StatsSink = Arc<Mutex<Box<dyn Write + Send>>>;

/// A running TCP filter server. Each connection is one filtered stream:
/// the client sends newline-delimited records and half-closes; the server
/// writes back the surviving records and closes.
pub struct Server {
    local_addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    accept_thread: Option<JoinHandle<()>>,
}

impl Server {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    /// Stop accepting and join the accept loop. In-flight connections
    /// finish on their own threads.
    pub fn shutdown(mut self) {
        self.request_shutdown();
        if let Some(handle) = self.accept_thread.take() {
            let _ = handle.join();
        }
    }

    fn request_shutdown(&self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // Unblock accept() with a throwaway connection.
        let _ = TcpStream::connect(self.local_addr);
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        if self.accept_thread.is_some() {
            self.request_shutdown();
        }
    }
}

/// Bind and serve until [`Server::shutdown`].
pub fn serve<A: ToSocketAddrs>(
    addr: A,
    scope: ServeScope,
    stats_sink: StatsSink,
) -> std::io::Result<Server> {
    let listener = TcpListener::bind(addr)?;
    let local_addr = listener.local_addr()?;
    let shutdown = Arc::new(AtomicBool::new(false));
    let global = Arc::new(ConcurrentByteSet::new());

    let accept_shutdown = Arc::clone(&shutdown);
    let accept_thread = std::thread::spawn(move || {
        for stream in listener.incoming() {
            if accept_shutdown.load(Ordering::SeqCst) {
                break;
            }
            let Ok(stream) = stream else { continue };
            let global = Arc::clone(&global);
            let sink = Arc::clone(&stats_sink);
            std::thread::spawn(move || {
                let _ = handle_connection(stream, scope, &global, &sink);
            });
        }
    });

    Ok(Server {
        local_addr,
        shutdown,
        accept_thread: Some(accept_thread),
    })
}

fn handle_connection(
    stream: TcpStream,
    scope: ServeScope,
    global: &ConcurrentByteSet,
    sink: &StatsSink,
) -> std::io::Result<()> {
    let reader = std::io::BufReader::new(stream.try_clone()?);
    let mut writer = std::io::BufWriter::new(stream.try_clone()?);
    let stats = match scope {
        ServeScope::PerConnection => {
            let mut membership = ByteSet::new();
            filter_stream(reader, &mut writer, &mut membership)
        }
        ServeScope::Global => {
            let mut membership = global;
            filter_stream(reader, &mut writer, &mut membership)
        }
    };
    let _ = stream.shutdown(Shutdown::Write);
    let stats = stats?;
    let mut sink = sink.lock().expect("stats sink poisoned");
    serde_json::to_writer(&mut *sink, &stats)?;
    sink.write_all(b"\n")?;
    sink.flush()?;
    Ok(())
}
