//! End-to-end tests of the chunkdedup binary against the shipped fixtures.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{Shutdown, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chunkdedup"))
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn chunkdedup")
}

fn stdout_json(output: &Output) -> serde_json::Value {
    assert!(
        output.status.success(),
        "exit {:?}, stderr: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stderr)
    );
    serde_json::from_slice(&output.stdout).expect("stdout JSON")
}

#[test]
fn dedup_happy_path_writes_report_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixtures().join("corpus_versioned/wiki.jsonl");
    let output = run_in(dir.path(), &["dedup", "--in", input.to_str().unwrap()]);
    let report = stdout_json(&output);
    assert_eq!(report["overall"]["total_items"], 247);
    assert_eq!(report["overall"]["unique_items"], 143);
    assert_eq!(report["math_equivalence_violations"], 0);

    let manifest: serde_json::Value = serde_json::from_slice(
        &std::fs::read(dir.path().join("chunkdedup.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["subcommand"], "dedup");
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 1);
    assert_eq!(manifest["outputs"][0]["path"], "<stdout>");
}

#[test]
fn analyze_corpus_reproduces_planted_totals() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixtures();
    let source = |name: &str| {
        format!(
            "{name}={}",
            fx.join(format!("corpus_versioned/{name}.jsonl")).display()
        )
    };
    let output = run_in(
        dir.path(),
        &[
            "analyze-corpus",
            "--source",
            &source("wiki"),
            "--source",
            &source("arxiv"),
            "--source",
            &source("qa"),
        ],
    );
    let report = stdout_json(&output);
    assert_eq!(report["overall"]["total_items"], 1526);
    assert_eq!(report["overall"]["unique_items"], 1383);
    let rho = report["overall"]["rho"].as_f64().unwrap();
    assert_eq!(format!("{rho:.4}"), "1.1034");
    let reduction = report["overall"]["byte_reduction_pct"].as_f64().unwrap();
    assert_eq!(format!("{reduction:.4}"), "9.3709");
}

#[test]
fn audit_trail_and_manifest_are_deterministic_across_runs() {
    let dir1 = tempfile::tempdir().unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    let input = fixtures().join("corpus_versioned/arxiv.jsonl");
    let run = |dir: &Path| {
        let out = run_in(
            dir,
            &[
                "dedup",
                "--in",
                input.to_str().unwrap(),
                "--audit",
                "audit.jsonl",
                "--out",
                "report.json",
            ],
        );
        assert!(out.status.success());
        (
            std::fs::read(dir.join("audit.jsonl")).unwrap(),
            std::fs::read(dir.join("report.json")).unwrap(),
            std::fs::read(dir.join("report.json.manifest.json")).unwrap(),
        )
    };
    let (audit1, report1, manifest1) = run(dir1.path());
    let (audit2, report2, manifest2) = run(dir2.path());
    assert_eq!(audit1, audit2);
    assert_eq!(audit1.iter().filter(|&&b| b == b'\n').count(), 51);
    assert_eq!(report1, report2);

    // Wall time differs; output digests must not.
    let m1: serde_json::Value = serde_json::from_slice(&manifest1).unwrap();
    let m2: serde_json::Value = serde_json::from_slice(&manifest2).unwrap();
    let digests = |m: &serde_json::Value| {
        m["outputs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|o| o["sha256"].as_str().unwrap().to_string())
            .collect::<Vec<_>>()
    };
    assert_eq!(digests(&m1), digests(&m2));
    assert_eq!(digests(&m1).len(), 2); // audit + report
}

#[test]
fn stats_reproduces_published_wilson_cells() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixtures();

    // Clean regime: post-audit cells 1/400 → 1.40%, 4/399 → 2.55%,
    // 6/399 → 3.24%, 6/398 → 3.25%.
    let output = run_in(
        dir.path(),
        &[
            "stats",
            "--verdicts",
            fx.join("verdicts_clean.jsonl").to_str().unwrap(),
            "--audit-file",
            fx.join("audits_clean.jsonl").to_str().unwrap(),
        ],
    );
    let report = stdout_json(&output);
    let rows = report["rows"].as_array().unwrap().clone();
    let cell = |vendor: &str| {
        let row = rows.iter().find(|r| r["vendor"] == vendor).unwrap();
        (
            row["mat_post"].as_u64().unwrap(),
            row["n_post"].as_u64().unwrap(),
            format!("{:.2}", row["ucl_post"].as_f64().unwrap() * 100.0),
            row["pass_flag"].as_bool().unwrap(),
        )
    };
    assert_eq!(cell("vendor-a"), (1, 400, "1.40".into(), true));
    assert_eq!(cell("vendor-b"), (4, 399, "2.55".into(), true));
    assert_eq!(cell("vendor-c"), (6, 399, "3.24".into(), true));
    assert_eq!(cell("vendor-d"), (6, 398, "3.25".into(), true));
    // Pre-audit: vendor-d at 18/400 → 7.00%.
    let d = rows.iter().find(|r| r["vendor"] == "vendor-d").unwrap();
    assert_eq!(
        format!("{:.2}", d["ucl_pre"].as_f64().unwrap() * 100.0),
        "7.00"
    );

    // High-redundancy regime: 3/199 → 4.34%, 1/200 → 2.78%, 0/198 → 1.90%,
    // 2/198 → 3.61%; pre-audit 6.39/5.03/7.05.
    let output = run_in(
        dir.path(),
        &[
            "stats",
            "--verdicts",
            fx.join("verdicts_highred.jsonl").to_str().unwrap(),
            "--audit-file",
            fx.join("audits_highred.jsonl").to_str().unwrap(),
            "--pretty",
        ],
    );
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout).into_owned();
    let json_part = &text[..text.find("\nvendor").unwrap() + 1];
    let report: serde_json::Value = serde_json::from_str(json_part).unwrap();
    let rows = report["rows"].as_array().unwrap().clone();
    let cell = |vendor: &str| {
        let row = rows.iter().find(|r| r["vendor"] == vendor).unwrap();
        (
            row["mat_post"].as_u64().unwrap(),
            row["n_post"].as_u64().unwrap(),
            format!("{:.2}", row["ucl_post"].as_f64().unwrap() * 100.0),
            format!("{:.2}", row["ucl_pre"].as_f64().unwrap() * 100.0),
        )
    };
    assert_eq!(cell("vendor-a"), (1, 200, "2.78".into(), "6.39".into()));
    assert_eq!(cell("vendor-b"), (2, 198, "3.61".into(), "7.05".into()));
    assert_eq!(cell("vendor-c"), (3, 199, "4.34".into(), "6.39".into()));
    assert_eq!(cell("vendor-d"), (0, 198, "1.90".into(), "5.03".into()));
    assert!(text.contains("PASS"));
}

#[test]
fn snowball_totals_match_snapshot_enumeration_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixtures().join("conversations.jsonl");
    let output = run_in(
        dir.path(),
        &["snowball", "--in", input.to_str().unwrap(), "--buckets"],
    );
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout).into_owned();
    let json_part = &text[..text.find("\nconversations=").unwrap() + 1];
    let report: serde_json::Value = serde_json::from_str(json_part).unwrap();

    // Oracle: parse the fixture and enumerate every snapshot directly.
    let mut raw_bytes = 0u64;
    let mut dedup_bytes = 0u64;
    let file = std::fs::File::open(&input).unwrap();
    for line in BufReader::new(file).lines() {
        let v: serde_json::Value = serde_json::from_str(&line.unwrap()).unwrap();
        let turns: Vec<&str> = v["turns"]
            .as_array()
            .unwrap()
            .iter()
            .map(|t| t.as_str().unwrap())
            .collect();
        for i in 1..=turns.len() {
            let snapshot: String = turns[..i].concat();
            raw_bytes += snapshot.len() as u64;
        }
        let mut seen = std::collections::HashSet::new();
        for turn in &turns {
            if seen.insert(*turn) {
                dedup_bytes += turn.len() as u64;
            }
        }
    }
    assert_eq!(
        report["aggregate"]["raw_bytes"].as_u64().unwrap(),
        raw_bytes
    );
    assert_eq!(
        report["aggregate"]["dedup_bytes"].as_u64().unwrap(),
        dedup_bytes
    );
    assert_eq!(report["skipped"], 0);
    assert_eq!(report["per_conversation"].as_array().unwrap().len(), 20);
}

#[test]
fn minhash_compare_counts_planted_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixtures().join("prompts.jsonl");
    let output = run_in(
        dir.path(),
        &["minhash-compare", "--in", input.to_str().unwrap()],
    );
    let report = stdout_json(&output);
    assert_eq!(report["total"], 400);
    assert_eq!(report["byte_exact_duplicates"], 40);
    let fuzzy = report["fuzzy_duplicates"].as_u64().unwrap();
    // Containment plus the near-duplicate margin the fixture plants.
    assert!(fuzzy > 40, "fuzzy {fuzzy} should exceed the 40 byte-exact duplicates");
    assert_eq!(report["both"], 40);
}

#[test]
fn retrieve_bench_distinct_corpus_and_multiplicity_factor() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixtures();
    let corpus = fx.join("retrieval/passages.jsonl");
    let queries = fx.join("retrieval/queries.txt");

    let output = run_in(
        dir.path(),
        &[
            "retrieve-bench",
            "--corpus",
            corpus.to_str().unwrap(),
            "--queries",
            queries.to_str().unwrap(),
            "--k",
            "30",
        ],
    );
    let report = stdout_json(&output);
    assert_eq!(report["doc_count"], 200);
    assert_eq!(report["query_count"], 50);
    // Globally-distinct corpus: median per-query reduction is 0.
    assert_eq!(report["reduction_fraction"]["median"], 0.0);
    assert_eq!(report["reduction_fraction"]["max"], 0.0);

    let output = run_in(
        dir.path(),
        &[
            "retrieve-bench",
            "--corpus",
            corpus.to_str().unwrap(),
            "--queries",
            queries.to_str().unwrap(),
            "--k",
            "30",
            "--multiplicity",
            "3",
        ],
    );
    let report = stdout_json(&output);
    for row in report["per_query"].as_array().unwrap() {
        let returned = row["returned_count"].as_u64().unwrap();
        assert!(returned > 0, "fixture queries should all match");
        let rf = row["reduction_fraction"].as_f64().unwrap();
        assert!((rf - 2.0 / 3.0).abs() < 1e-12, "rf {rf}");
    }
}

#[test]
fn retrieve_bench_inline_query() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = fixtures().join("retrieval/passages.jsonl");
    let output = run_in(
        dir.path(),
        &[
            "retrieve-bench",
            "--corpus",
            corpus.to_str().unwrap(),
            "--query",
            "term005 term010",
            "--query",
            "docid007",
            "--k",
            "5",
        ],
    );
    let report = stdout_json(&output);
    assert_eq!(report["query_count"], 2);
    // The unique docid token pins its document to rank 1.
    assert!(report["per_query"][1]["returned_count"].as_u64().unwrap() >= 1);

    // Omitting both query forms is a usage error.
    let output = run_in(
        dir.path(),
        &["retrieve-bench", "--corpus", corpus.to_str().unwrap()],
    );
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn unknown_flags_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let output = run_in(dir.path(), &["dedup", "--no-such-flag"]);
    assert_eq!(output.status.code(), Some(1));
    let output = run_in(dir.path(), &["not-a-subcommand"]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn serve_standard_stream_mode_filters_stdin() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = bin()
        .args(["serve", "--listen", "-", "--stats-out", "stats.jsonl"])
        .current_dir(dir.path())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"a\nb\na\nc\nb\n")
        .unwrap();
    let output = child.wait_with_output().unwrap();
    assert!(output.status.success());
    assert_eq!(output.stdout, b"a\nb\nc\n");
    let stats: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("stats.jsonl")).unwrap()).unwrap();
    assert_eq!(stats["records_in"], 5);
    assert_eq!(stats["records_out"], 3);
}

fn spawn_server(dir: &Path, scope: &str) -> (std::process::Child, String) {
    let mut child = bin()
        .args([
            "serve",
            "--listen",
            "127.0.0.1:0",
            "--scope",
            scope,
            "--stats-out",
            "stats.jsonl",
        ])
        .current_dir(dir)
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let stderr = child.stderr.take().unwrap();
    let mut line = String::new();
    BufReader::new(stderr).read_line(&mut line).unwrap();
    let addr = line
        .trim()
        .strip_prefix("listening on ")
        .unwrap_or_else(|| panic!("unexpected banner: {line}"))
        .to_string();
    (child, addr)
}

fn roundtrip(addr: &str, payload: &[u8]) -> Vec<u8> {
    let mut conn = TcpStream::connect(addr).unwrap();
    conn.write_all(payload).unwrap();
    conn.shutdown(Shutdown::Write).unwrap();
    let mut back = Vec::new();
    conn.read_to_end(&mut back).unwrap();
    back
}

#[test]
fn serve_tcp_scopes() {
    let dir = tempfile::tempdir().unwrap();
    let (mut child, addr) = spawn_server(dir.path(), "per-connection");
    assert_eq!(roundtrip(&addr, b"a\n"), b"a\n");
    assert_eq!(roundtrip(&addr, b"a\n"), b"a\n");
    child.kill().unwrap();
    child.wait().unwrap();

    let dir = tempfile::tempdir().unwrap();
    let (mut child, addr) = spawn_server(dir.path(), "global");
    assert_eq!(roundtrip(&addr, b"a\n"), b"a\n");
    assert_eq!(roundtrip(&addr, b"a\n"), b"");
    assert_eq!(roundtrip(&addr, b"b\na\n"), b"b\n");
    child.kill().unwrap();
    child.wait().unwrap();
}
