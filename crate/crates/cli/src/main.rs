mod manifest;

use anyhow::{bail, Context, Result};
use chunkdedup_core::corpus::{analyze_corpus, audit_records, write_audit, CorpusSource};
use chunkdedup_core::membership::ByteSet;
use chunkdedup_core::metrics::{
    approx_token_count, render_pct, render_ratio, summarize, DistributionSummary,
};
use chunkdedup_core::minhash::compare_exact_vs_fuzzy;
use chunkdedup_core::retriever::{
    apply_multiplicity_factor, build_index_with_params, per_query_stats, QueryDedupStat,
};
use chunkdedup_core::snowball::{load_conversations, measure_all, ConversationMapping};
use chunkdedup_core::stats::{audit_adjust, fleiss_kappa, load_verdicts, Category, Kappa};
use chunkdedup_core::stream::{filter_stream, serve, ServeScope, StatsSink};
use clap::{Args, Parser, Subcommand, ValueEnum};
use manifest::{default_manifest_path, ManifestBuilder};
use serde::Serialize;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

/// Byte-exact chunk deduplication engine and redundancy measurement
/// harness.
#[derive(Parser)]
#[command(name = "chunkdedup", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutputArgs {
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print an aligned text table in addition to the JSON report.
    #[arg(long)]
    pretty: bool,
    /// Run manifest path (default: beside the output).
    #[arg(long)]
    manifest_out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Deduplicate one JSONL corpus and print its report.
    Dedup {
        /// Input JSONL file.
        #[arg(long = "in")]
        input: PathBuf,
        /// JSON field holding the chunk text.
        #[arg(long, default_value = "text")]
        field: String,
        /// Source label (default: input file stem).
        #[arg(long)]
        source: Option<String>,
        /// Write a per-chunk audit trail (JSONL) to this path.
        #[arg(long)]
        audit: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Globally deduplicate several labeled JSONL sources.
    AnalyzeCorpus {
        /// Repeatable LABEL=PATH source declarations.
        #[arg(long = "source", required = true)]
        sources: Vec<String>,
        #[arg(long, default_value = "text")]
        field: String,
        #[arg(long)]
        audit: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// BM25 retrieval over a passage corpus with per-query dedup stats.
    RetrieveBench {
        /// Passage corpus (JSONL).
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "text")]
        field: String,
        /// Query file, one query per line.
        #[arg(long, required_unless_present = "query")]
        queries: Option<PathBuf>,
        /// Inline query text (repeatable; alternative to --queries).
        #[arg(long)]
        query: Vec<String>,
        /// Results per query.
        #[arg(long, default_value_t = 30)]
        k: usize,
        /// Duplicate-multiplicity factor applied to each result list.
        #[arg(long, default_value_t = 1)]
        multiplicity: usize,
        #[arg(long, default_value_t = 1.2)]
        k1: f64,
        #[arg(long, default_value_t = 0.75)]
        b: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Snapshot-by-snapshot dedup measurement of multi-turn conversations.
    Snowball {
        /// Conversations (JSONL).
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "conversation_id")]
        id_field: String,
        #[arg(long, default_value = "turns")]
        turns_field: String,
        #[arg(long, default_value = "role")]
        role_field: String,
        #[arg(long, default_value = "content")]
        content_field: String,
        /// Print the turn-count bucket table.
        #[arg(long)]
        buckets: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Byte-exact vs MinHash-LSH duplicate comparison over one text list.
    MinhashCompare {
        /// Prompts (JSONL).
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "text")]
        field: String,
        /// Exact-Jaccard confirmation threshold.
        #[arg(long, default_value_t = 0.9)]
        threshold: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Panel statistics: Wilson bounds, kappa, five-category audit.
    Stats {
        /// Verdict records (JSONL).
        #[arg(long)]
        verdicts: PathBuf,
        /// Audit verdicts (JSONL of question_id/vendor/verdict).
        #[arg(long)]
        audit_file: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Inline streaming filter: TCP server, or standard streams with
    /// `--listen -`.
    Serve {
        /// Bind address (host:port), or `-` for stdin/stdout filtering.
        #[arg(long)]
        listen: String,
        #[arg(long, value_enum, default_value_t = ScopeArg::PerConnection)]
        scope: ScopeArg,
        /// Per-connection stats frames (JSONL) go here (default: stderr).
        #[arg(long)]
        stats_out: Option<PathBuf>,
        /// Run manifest path.
        #[arg(long)]
        manifest_out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScopeArg {
    /// Each connection starts with empty membership state.
    PerConnection,
    /// All connections share one membership structure.
    Global,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap would exit 2 on its own; usage problems are input errors.
            let _ = e.print();
            std::process::exit(1);
        }
    };
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Dedup {
            input,
            field,
            source,
            audit,
            output,
        } => {
            let label = source.unwrap_or_else(|| {
                input
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "input".into())
            });
            let config = serde_json::json!({
                "in": input.display().to_string(),
                "field": field,
                "source": label,
                "audit": audit.as_ref().map(|p| p.display().to_string()),
            });
            run_corpus(
                "dedup",
                config,
                vec![(label, input)],
                &field,
                audit.as_deref(),
                &output,
            )
        }
        Command::AnalyzeCorpus {
            sources,
            field,
            audit,
            output,
        } => {
            let mut parsed = Vec::with_capacity(sources.len());
            for decl in &sources {
                let (label, path) = decl
                    .split_once('=')
                    .with_context(|| format!("--source {decl}: expected LABEL=PATH"))?;
                parsed.push((label.to_string(), PathBuf::from(path)));
            }
            let config = serde_json::json!({
                "sources": sources,
                "field": field,
                "audit": audit.as_ref().map(|p| p.display().to_string()),
            });
            run_corpus(
                "analyze-corpus",
                config,
                parsed,
                &field,
                audit.as_deref(),
                &output,
            )
        }
        Command::RetrieveBench {
            corpus,
            field,
            queries,
            query,
            k,
            multiplicity,
            k1,
            b,
            output,
        } => run_retrieve_bench(
            &corpus,
            &field,
            queries.as_deref(),
            query,
            k,
            multiplicity,
            k1,
            b,
            &output,
        ),
        Command::Snowball {
            input,
            id_field,
            turns_field,
            role_field,
            content_field,
            buckets,
            output,
        } => {
            let mapping = ConversationMapping {
                id_field,
                turns_field,
                role_field,
                content_field,
            };
            run_snowball(&input, &mapping, buckets, &output)
        }
        Command::MinhashCompare {
            input,
            field,
            threshold,
            output,
        } => run_minhash_compare(&input, &field, threshold, &output),
        Command::Stats {
            verdicts,
            audit_file,
            output,
        } => run_stats(&verdicts, audit_file.as_deref(), &output),
        Command::Serve {
            listen,
            scope,
            stats_out,
            manifest_out,
        } => run_serve(
            &listen,
            scope,
            stats_out.as_deref(),
            manifest_out.as_deref(),
        ),
    }
}

/// Serialize the report, emit it (file or stdout), record digests, write
/// the manifest.
fn emit_report<T: Serialize>(
    report: &T,
    output: &OutputArgs,
    builder: &mut ManifestBuilder,
) -> Result<()> {
    let mut json = serde_json::to_vec_pretty(report)?;
    json.push(b'\n');
    match &output.out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            std::fs::write(path, &json)
                .with_context(|| format!("writing report to {}", path.display()))?;
            builder.output_file(path)?;
        }
        None => {
            std::io::stdout().write_all(&json)?;
            builder.output_bytes("<stdout>", &json);
        }
    }
    Ok(())
}

fn finish_manifest(builder: ManifestBuilder, output: &OutputArgs) -> Result<()> {
    let path = output
        .manifest_out
        .clone()
        .unwrap_or_else(|| default_manifest_path(output.out.as_deref()));
    builder.write(&path)
}

fn run_corpus(
    subcommand: &str,
    config: serde_json::Value,
    sources: Vec<(String, PathBuf)>,
    field: &str,
    audit: Option<&Path>,
    output: &OutputArgs,
) -> Result<i32> {
    let mut builder = ManifestBuilder::new(subcommand, config);
    let mut corpus_sources = Vec::with_capacity(sources.len());
    for (label, path) in &sources {
        builder.input_file(path)?;
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        corpus_sources.push(CorpusSource {
            reader: BufReader::new(file),
            text_field: field.to_string(),
            label: label.clone(),
        });
    }
    let mut analysis = analyze_corpus(corpus_sources)?;

    if let Some(audit_path) = audit {
        let records = audit_records(&analysis.chunks, &analysis.result);
        if let Some(parent) = audit_path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let file = File::create(audit_path)
            .with_context(|| format!("creating audit file {}", audit_path.display()))?;
        write_audit(&records, BufWriter::new(file))?;
        analysis.report.audit_path = Some(audit_path.display().to_string());
        builder.output_file(audit_path)?;
    }

    emit_report(&analysis.report, output, &mut builder)?;
    if output.pretty {
        print_corpus_table(&analysis.report);
    }
    finish_manifest(builder, output)?;

    if analysis.report.math_equivalence_violations > 0 {
        eprintln!(
            "invariant violation: verify_equivalence reported {} mismatches",
            analysis.report.math_equivalence_violations
        );
        return Ok(2);
    }
    Ok(0)
}

fn print_corpus_table(report: &chunkdedup_core::corpus::CorpusReport) {
    println!(
        "{:<12} {:>9} {:>9} {:>8} {:>10} {:>10}",
        "source", "total", "unique", "rho", "byte red%", "tok red%"
    );
    let print_row = |label: &str, s: &chunkdedup_core::metrics::ReductionStats| {
        println!(
            "{:<12} {:>9} {:>9} {:>8} {:>10} {:>10}",
            label,
            s.total_items,
            s.unique_items,
            s.rho.map(render_ratio).unwrap_or_else(|| "-".into()),
            render_pct(s.byte_reduction_pct),
            render_pct(s.token_reduction_pct),
        );
    };
    for (label, stats) in &report.per_source {
        print_row(label, stats);
    }
    print_row("(overall)", &report.overall);
    for pair in &report.cross_source_jaccard {
        println!(
            "jaccard {} ~ {}: {:.6}",
            pair.sources[0], pair.sources[1], pair.jaccard
        );
    }
}

#[derive(Serialize)]
struct BenchQueryRow {
    #[serde(flatten)]
    stat: QueryDedupStat,
    token_reduction_pct: f64,
}

#[derive(Serialize)]
struct RetrieveBenchReport {
    doc_count: usize,
    query_count: usize,
    k: usize,
    multiplicity_factor: usize,
    reduction_fraction: Option<DistributionSummary>,
    token_reduction_pct: Option<DistributionSummary>,
    cross_source_duplicates: Option<DistributionSummary>,
    per_query: Vec<BenchQueryRow>,
}

#[allow(clippy::too_many_arguments)]
fn run_retrieve_bench(
    corpus: &Path,
    field: &str,
    queries: Option<&Path>,
    inline_queries: Vec<String>,
    k: usize,
    multiplicity: usize,
    k1: f64,
    b: f64,
    output: &OutputArgs,
) -> Result<i32> {
    if multiplicity < 1 {
        bail!("--multiplicity must be at least 1");
    }
    if k < 1 {
        bail!("--k must be at least 1");
    }
    let config = serde_json::json!({
        "corpus": corpus.display().to_string(),
        "field": field,
        "queries": queries.map(|q| q.display().to_string()),
        "query": inline_queries,
        "k": k, "multiplicity": multiplicity, "k1": k1, "b": b,
    });
    let mut builder = ManifestBuilder::new("retrieve-bench", config);
    builder.input_file(corpus)?;
    if let Some(queries) = queries {
        builder.input_file(queries)?;
    }

    let file = File::open(corpus).with_context(|| format!("opening {}", corpus.display()))?;
    let (chunks, ingest) =
        chunkdedup_core::corpus::ingest_jsonl(BufReader::new(file), field, "corpus")?;
    if ingest.malformed + ingest.missing_field > 0 {
        eprintln!(
            "corpus: skipped {} malformed and {} missing-field lines",
            ingest.malformed, ingest.missing_field
        );
    }
    let index = build_index_with_params(chunks, k1, b)?;

    let mut query_lines: Vec<String> = match queries {
        Some(path) => BufReader::new(File::open(path)?)
            .lines()
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .filter(|l| !l.trim().is_empty())
            .collect(),
        None => Vec::new(),
    };
    query_lines.extend(inline_queries);

    let mut per_query = Vec::with_capacity(query_lines.len());
    for (i, text) in query_lines.iter().enumerate() {
        let results: Vec<_> = index.query(text, k).into_iter().map(|(c, _)| c).collect();
        let expanded = if multiplicity > 1 {
            apply_multiplicity_factor(&results, multiplicity)
        } else {
            results
        };
        let stat = per_query_stats(&format!("q{i:04}"), k, &expanded);
        let raw_tokens: u64 = expanded
            .iter()
            .map(|c| approx_token_count(&c.payload))
            .sum();
        let dedup_tokens: u64 = {
            let mut seen = ByteSet::new();
            expanded
                .iter()
                .filter(|c| seen.insert_if_absent(&c.payload))
                .map(|c| approx_token_count(&c.payload))
                .sum()
        };
        let token_reduction_pct = if raw_tokens == 0 {
            0.0
        } else {
            100.0 * (1.0 - dedup_tokens as f64 / raw_tokens as f64)
        };
        per_query.push(BenchQueryRow {
            stat,
            token_reduction_pct,
        });
    }

    let report = RetrieveBenchReport {
        doc_count: index.doc_count(),
        query_count: per_query.len(),
        k,
        multiplicity_factor: multiplicity,
        reduction_fraction: summarize(
            &per_query
                .iter()
                .map(|r| r.stat.reduction_fraction)
                .collect::<Vec<_>>(),
        ),
        token_reduction_pct: summarize(
            &per_query
                .iter()
                .map(|r| r.token_reduction_pct)
                .collect::<Vec<_>>(),
        ),
        cross_source_duplicates: summarize(
            &per_query
                .iter()
                .map(|r| r.stat.cross_source_duplicates as f64)
                .collect::<Vec<_>>(),
        ),
        per_query,
    };
    emit_report(&report, output, &mut builder)?;
    if output.pretty {
        let fmt = |s: &Option<DistributionSummary>| match s {
            Some(s) => format!(
                "n={} mean={:.4} median={:.4} p95={:.4} max={:.4}",
                s.n, s.mean, s.median, s.p95, s.max
            ),
            None => "EMPTY".into(),
        };
        println!(
            "reduction fraction per query   {}",
            fmt(&report.reduction_fraction)
        );
        println!(
            "token reduction % per query    {}",
            fmt(&report.token_reduction_pct)
        );
        println!(
            "cross-source dups per query    {}",
            fmt(&report.cross_source_duplicates)
        );
    }
    finish_manifest(builder, output)?;
    Ok(0)
}

fn run_snowball(
    input: &Path,
    mapping: &ConversationMapping,
    buckets: bool,
    output: &OutputArgs,
) -> Result<i32> {
    let config = serde_json::json!({
        "in": input.display().to_string(),
        "id_field": mapping.id_field,
        "turns_field": mapping.turns_field,
        "role_field": mapping.role_field,
        "content_field": mapping.content_field,
    });
    let mut builder = ManifestBuilder::new("snowball", config);
    builder.input_file(input)?;
    let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let load = load_conversations(BufReader::new(file), mapping)?;
    if load.malformed > 0 {
        eprintln!("skipped {} malformed conversation lines", load.malformed);
    }
    if load.conversations.is_empty() {
        bail!("no conversations loaded from {}", input.display());
    }
    let report = measure_all(&load.conversations);
    emit_report(&report, output, &mut builder)?;
    if output.pretty || buckets {
        println!(
            "conversations={} skipped={} raw_bytes={} dedup_bytes={} byte_red={} tok_red={}",
            report.per_conversation.len(),
            report.skipped,
            report.aggregate.raw_bytes,
            report.aggregate.dedup_bytes,
            render_pct(report.aggregate.byte_reduction_pct),
            render_pct(report.aggregate.token_reduction_pct),
        );
        println!(
            "{:<8} {:>5} {:>10} {:>10} {:>10}",
            "turns", "n", "median%", "mean%", "p95%"
        );
        for bucket in &report.buckets {
            match &bucket.summary {
                Some(s) => println!(
                    "{:<8} {:>5} {:>10} {:>10} {:>10}",
                    bucket.label,
                    bucket.n,
                    render_pct(s.median),
                    render_pct(s.mean),
                    render_pct(s.p95)
                ),
                None => println!(
                    "{:<8} {:>5} {:>10} {:>10} {:>10}",
                    bucket.label, 0, "-", "-", "-"
                ),
            }
        }
    }
    finish_manifest(builder, output)?;
    Ok(0)
}

fn run_minhash_compare(
    input: &Path,
    field: &str,
    threshold: f64,
    output: &OutputArgs,
) -> Result<i32> {
    let config = serde_json::json!({
        "in": input.display().to_string(),
        "field": field,
        "threshold": threshold,
    });
    let mut builder = ManifestBuilder::new("minhash-compare", config);
    builder.input_file(input)?;
    let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let (chunks, _) = chunkdedup_core::corpus::ingest_jsonl(BufReader::new(file), field, "in")?;
    let texts: Vec<String> = chunks
        .iter()
        .map(|c| String::from_utf8_lossy(&c.payload).into_owned())
        .collect();
    let report = compare_exact_vs_fuzzy(&texts, threshold)?;
    emit_report(&report, output, &mut builder)?;
    if output.pretty {
        println!(
            "total={} byte-exact={} ({}%) fuzzy={} ({}%) fuzzy-only={}",
            report.total,
            report.byte_exact_duplicates,
            render_pct(report.byte_exact_pct),
            report.fuzzy_duplicates,
            render_pct(report.fuzzy_pct),
            report.fuzzy_only
        );
    }
    finish_manifest(builder, output)?;
    Ok(0)
}

#[derive(Serialize)]
struct StatsReport {
    rows: Vec<chunkdedup_core::stats::VendorQualityRow>,
    fleiss_kappa: Option<Kappa>,
    complete_records: usize,
    dropped_records: u64,
}

fn run_stats(verdicts: &Path, audit_file: Option<&Path>, output: &OutputArgs) -> Result<i32> {
    let config = serde_json::json!({
        "verdicts": verdicts.display().to_string(),
        "audit_file": audit_file.map(|p| p.display().to_string()),
    });
    let mut builder = ManifestBuilder::new("stats", config);
    builder.input_file(verdicts)?;
    let file = File::open(verdicts).with_context(|| format!("opening {}", verdicts.display()))?;
    let load = load_verdicts(BufReader::new(file))?;
    for warning in &load.warnings {
        eprintln!("warning: {warning}");
    }
    let mut records = load.records;

    if let Some(audit_path) = audit_file {
        builder.input_file(audit_path)?;
        let file =
            File::open(audit_path).with_context(|| format!("opening {}", audit_path.display()))?;
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            #[derive(serde::Deserialize)]
            struct AuditLine {
                question_id: String,
                vendor: String,
                verdict: chunkdedup_core::stats::AuditVerdict,
            }
            let parsed: AuditLine = serde_json::from_str(&line).with_context(|| {
                format!(
                    "audit file line {}: unknown verdict or bad record",
                    lineno + 1
                )
            })?;
            match records
                .iter_mut()
                .find(|r| r.question_id == parsed.question_id && r.vendor == parsed.vendor)
            {
                Some(rec) => rec.audit = Some(parsed.verdict),
                None => eprintln!(
                    "warning: audit line {} references unknown pair {}/{}",
                    lineno + 1,
                    parsed.question_id,
                    parsed.vendor
                ),
            }
        }
    }

    let rows = audit_adjust(&records)?;
    // Pre-audit inter-rater agreement over the complete 5-vote records.
    let items: Vec<Vec<u64>> = records
        .iter()
        .map(|r| {
            let mut counts = vec![0u64; 3];
            for vote in &r.votes {
                let idx = match vote {
                    Category::Equivalent => 0,
                    Category::MinorDifferences => 1,
                    Category::MateriallyDifferent => 2,
                };
                counts[idx] += 1;
            }
            counts
        })
        .collect();
    let fleiss = fleiss_kappa(&items, 5).ok();

    let report = StatsReport {
        rows,
        fleiss_kappa: fleiss,
        complete_records: records.len(),
        dropped_records: load.malformed,
    };
    emit_report(&report, output, &mut builder)?;
    if output.pretty {
        println!(
            "{:<12} {:>6} {:>9} {:>9} {:>9} {:>7} {:>9} {:>6} {:>6}",
            "vendor", "n", "MAT pre", "UCL pre", "MAT post", "n post", "UCL post", "ties", "pass"
        );
        for row in &report.rows {
            let pct = |u: Option<f64>| {
                u.map(|v| format!("{:.2}%", v * 100.0))
                    .unwrap_or_else(|| "-".into())
            };
            println!(
                "{:<12} {:>6} {:>9} {:>9} {:>9} {:>7} {:>9} {:>6} {:>6}",
                row.vendor,
                row.n_pre,
                row.mat_pre,
                pct(row.ucl_pre),
                row.mat_post,
                row.n_post,
                pct(row.ucl_post),
                row.ties,
                if row.pass_flag { "PASS" } else { "FAIL" }
            );
        }
    }
    finish_manifest(builder, output)?;
    Ok(0)
}

fn run_serve(
    listen: &str,
    scope: ScopeArg,
    stats_out: Option<&Path>,
    manifest_out: Option<&Path>,
) -> Result<i32> {
    let config = serde_json::json!({
        "listen": listen,
        "scope": match scope {
            ScopeArg::PerConnection => "per-connection",
            ScopeArg::Global => "global",
        },
        "stats_out": stats_out.map(|p| p.display().to_string()),
    });
    let builder = ManifestBuilder::new("serve", config);
    let manifest_path = manifest_out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| default_manifest_path(None));

    let stats_sink: StatsSink = match stats_out {
        Some(path) => Arc::new(Mutex::new(Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )))),
        None => Arc::new(Mutex::new(Box::new(std::io::stderr()))),
    };

    if listen == "-" {
        // Standard-stream mode: one per-stream filter over stdin/stdout.
        builder.write(&manifest_path)?;
        let stdin = std::io::stdin().lock();
        let stdout = std::io::stdout().lock();
        let mut membership = ByteSet::new();
        let stats = filter_stream(stdin, BufWriter::new(stdout), &mut membership)?;
        let mut sink = stats_sink.lock().expect("stats sink");
        serde_json::to_writer(&mut *sink, &stats)?;
        sink.write_all(b"\n")?;
        sink.flush()?;
        return Ok(0);
    }

    let core_scope = match scope {
        ScopeArg::PerConnection => ServeScope::PerConnection,
        ScopeArg::Global => ServeScope::Global,
    };
    let server = serve(listen, core_scope, stats_sink)?;
    builder.write(&manifest_path)?;
    eprintln!("listening on {}", server.local_addr());
    // Runs until the process receives a termination signal.
    loop {
        std::thread::park();
    }
}
