//! Statistical validation arithmetic: Wilson 95% upper bound, Fleiss and
//! Cohen kappa, panel-majority tabulation, and the five-category audit
//! adjustment.
//!
//! Conventions:
//! * Wilson bounds use z = 1.959964 (two-sided 95%) so published table cells
//!   round-trip at 2 decimals.
//! * Tied panels are excluded from both the MAT numerator and the
//!   denominator of the strict test and reported separately. The source
//!   tables do not state a denominator rule for ties; this is our documented
//!   assumption.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::hash::Hash;
use std::io::BufRead;
use thiserror::Error;

/// Two-sided 95% normal quantile used by all Wilson bounds.
pub const WILSON_Z: f64 = 1.959964;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("n must be at least 1")]
    ZeroN,
    #[error("successes {successes} exceed n {n}")]
    SuccessesExceedN { successes: u64, n: u64 },
    #[error("bad category counts: {0}")]
    BadCounts(String),
    #[error("no rating pairs supplied")]
    Empty,
    #[error("panel requires exactly 5 votes, got {0}")]
    BadVoteCount(usize),
    #[error("record {question_id}/{vendor}: {problem}")]
    BadRecord {
        question_id: String,
        vendor: String,
        problem: String,
    },
}

/// Upper bound of the Wilson score interval for `successes` out of `n` at
/// 95% confidence:
/// (p̂ + z²/2n + z·sqrt(p̂(1−p̂)/n + z²/4n²)) / (1 + z²/n).
pub fn wilson_ucl(successes: u64, n: u64) -> Result<f64, StatsError> {
    if n == 0 {
        return Err(StatsError::ZeroN);
    }
    if successes > n {
        return Err(StatsError::SuccessesExceedN { successes, n });
    }
    let z = WILSON_Z;
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let numerator = p + z2 / (2.0 * nf) + z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    Ok(numerator / (1.0 + z2 / nf))
}

/// Kappa statistics can be undefined when expected agreement is 1 (all votes
/// in one category); that case is reported explicitly, never as NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Kappa {
    Value(f64),
    Degenerate,
}

impl Kappa {
    pub fn value(self) -> Option<f64> {
        match self {
            Kappa::Value(v) => Some(v),
            Kappa::Degenerate => None,
        }
    }
}

/// Fleiss kappa over items rated by a fixed-size rater panel.
///
/// `items` holds one per-item category-count vector; every vector must have
/// the same number of categories (≥ 2) and sum to `raters`.
pub fn fleiss_kappa(items: &[Vec<u64>], raters: u64) -> Result<Kappa, StatsError> {
    if items.len() < 2 {
        return Err(StatsError::BadCounts(format!(
            "need at least 2 items, got {}",
            items.len()
        )));
    }
    if raters < 2 {
        return Err(StatsError::BadCounts(format!(
            "need at least 2 raters, got {raters}"
        )));
    }
    let categories = items[0].len();
    if categories < 2 {
        return Err(StatsError::BadCounts(format!(
            "need at least 2 categories, got {categories}"
        )));
    }
    for (i, counts) in items.iter().enumerate() {
        if counts.len() != categories {
            return Err(StatsError::BadCounts(format!(
                "item {i} has {} categories, expected {categories}",
                counts.len()
            )));
        }
        let sum: u64 = counts.iter().sum();
        if sum != raters {
            return Err(StatsError::BadCounts(format!(
                "item {i} votes sum to {sum}, expected {raters}"
            )));
        }
    }

    let n_items = items.len() as f64;
    let n = raters as f64;

    // Per-item observed agreement P_i = (Σ n_ij² − n) / (n(n−1)).
    let p_bar = items
        .iter()
        .map(|counts| {
            let sq_sum: u64 = counts.iter().map(|&c| c * c).sum();
            (sq_sum as f64 - n) / (n * (n - 1.0))
        })
        .sum::<f64>()
        / n_items;

    // Expected agreement from category marginals.
    let p_e = (0..categories)
        .map(|j| {
            let col: u64 = items.iter().map(|counts| counts[j]).sum();
            let p_j = col as f64 / (n_items * n);
            p_j * p_j
        })
        .sum::<f64>();

    if p_e >= 1.0 {
        return Ok(Kappa::Degenerate);
    }
    Ok(Kappa::Value((p_bar - p_e) / (1.0 - p_e)))
}

/// Cohen's kappa for two raters over arbitrary category labels.
pub fn cohens_kappa<C: Eq + Hash + Clone>(pairs: &[(C, C)]) -> Result<Kappa, StatsError> {
    if pairs.is_empty() {
        return Err(StatsError::Empty);
    }
    let n = pairs.len() as f64;
    let mut observed = 0u64;
    let mut marg_a: std::collections::HashMap<C, u64> = std::collections::HashMap::new();
    let mut marg_b: std::collections::HashMap<C, u64> = std::collections::HashMap::new();
    for (a, b) in pairs {
        if a == b {
            observed += 1;
        }
        *marg_a.entry(a.clone()).or_default() += 1;
        *marg_b.entry(b.clone()).or_default() += 1;
    }
    let p_o = observed as f64 / n;
    let p_e: f64 = marg_a
        .iter()
        .map(|(cat, &ca)| {
            let cb = marg_b.get(cat).copied().unwrap_or(0);
            (ca as f64 / n) * (cb as f64 / n)
        })
        .sum();
    if p_e >= 1.0 {
        return Ok(Kappa::Degenerate);
    }
    Ok(Kappa::Value((p_o - p_e) / (1.0 - p_e)))
}

/// Judge categories for raw-vs-deduplicated answer pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "EQ")]
    Equivalent,
    #[serde(rename = "MIN")]
    MinorDifferences,
    #[serde(rename = "MAT")]
    MateriallyDifferent,
}

/// Five-category human audit verdict on a panel-MAT pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditVerdict {
    /// Real regression: keep as MAT.
    TrulyWrong,
    /// Judges over-flagged phrasing: remove from MAT.
    JudgesOverflag,
    /// Deduplicated answer at least as good: remove from MAT.
    DedupBetter,
    /// Question or ground truth defective: remove from MAT and exclude from
    /// the denominator.
    BadQuestion,
    /// Annotator could not decide: keep the panel majority.
    Uncertain,
}

/// One (question × vendor) pair: five panel votes plus an optional audit
/// verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub question_id: String,
    pub vendor: String,
    pub votes: Vec<Category>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditVerdict>,
}

/// Plurality outcome of a 5-vote panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PanelOutcome {
    Majority(Category),
    /// The top vote count is shared (e.g. 2-2-1); excluded from MAT counts.
    Tie,
}

/// Strict-plurality category of exactly five votes.
pub fn panel_majority(votes: &[Category]) -> Result<PanelOutcome, StatsError> {
    if votes.len() != 5 {
        return Err(StatsError::BadVoteCount(votes.len()));
    }
    let mut counts: BTreeMap<Category, u64> = BTreeMap::new();
    for v in votes {
        *counts.entry(*v).or_default() += 1;
    }
    let top = counts.values().copied().max().unwrap_or(0);
    let leaders: Vec<Category> = counts
        .iter()
        .filter(|(_, &c)| c == top)
        .map(|(cat, _)| *cat)
        .collect();
    if leaders.len() > 1 {
        Ok(PanelOutcome::Tie)
    } else {
        Ok(PanelOutcome::Majority(leaders[0]))
    }
}

/// Per-vendor strict-test row before and after the audit adjustment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VendorQualityRow {
    pub vendor: String,
    /// Complete non-tied pairs.
    pub n_pre: u64,
    pub mat_pre: u64,
    pub ucl_pre: Option<f64>,
    pub n_post: u64,
    pub mat_post: u64,
    pub ucl_post: Option<f64>,
    /// ucl_post < 0.05.
    pub pass_flag: bool,
    pub ties: u64,
}

/// Apply the five-category audit protocol per vendor and recompute the
/// Wilson bound on the adjusted counts.
///
/// Effects per audited MAT-majority record: `truly_wrong` keeps the MAT;
/// `judges_overflag` and `dedup_better` remove it from the numerator;
/// `bad_question` removes it from the numerator and the denominator;
/// `uncertain` (and a missing verdict) keep the panel majority.
pub fn audit_adjust(records: &[VerdictRecord]) -> Result<Vec<VendorQualityRow>, StatsError> {
    let mut by_vendor: BTreeMap<&str, Vec<&VerdictRecord>> = BTreeMap::new();
    for rec in records {
        by_vendor.entry(rec.vendor.as_str()).or_default().push(rec);
    }

    let mut rows = Vec::with_capacity(by_vendor.len());
    for (vendor, recs) in by_vendor {
        let mut n_pre = 0u64;
        let mut mat_pre = 0u64;
        let mut mat_post = 0u64;
        let mut excluded = 0u64;
        let mut ties = 0u64;
        for rec in recs {
            match panel_majority(&rec.votes).map_err(|e| StatsError::BadRecord {
                question_id: rec.question_id.clone(),
                vendor: rec.vendor.clone(),
                problem: e.to_string(),
            })? {
                PanelOutcome::Tie => {
                    ties += 1;
                    continue;
                }
                PanelOutcome::Majority(Category::MateriallyDifferent) => {
                    n_pre += 1;
                    mat_pre += 1;
                    match rec.audit {
                        Some(AuditVerdict::TrulyWrong) | Some(AuditVerdict::Uncertain) | None => {
                            mat_post += 1
                        }
                        Some(AuditVerdict::JudgesOverflag) | Some(AuditVerdict::DedupBetter) => {}
                        Some(AuditVerdict::BadQuestion) => excluded += 1,
                    }
                }
                PanelOutcome::Majority(_) => n_pre += 1,
            }
        }
        let n_post = n_pre - excluded;
        let ucl_pre = (n_pre > 0)
            .then(|| wilson_ucl(mat_pre, n_pre))
            .transpose()?;
        let ucl_post = (n_post > 0)
            .then(|| wilson_ucl(mat_post, n_post))
            .transpose()?;
        rows.push(VendorQualityRow {
            vendor: vendor.to_string(),
            n_pre,
            mat_pre,
            ucl_pre,
            n_post,
            mat_post,
            ucl_post,
            pass_flag: ucl_post.is_some_and(|u| u < 0.05),
            ties,
        });
    }
    Ok(rows)
}

/// Outcome of loading a VerdictRecord JSONL stream.
#[derive(Debug, Default)]
pub struct VerdictLoad {
    pub records: Vec<VerdictRecord>,
    /// Lines with unparsable JSON or unknown categories/verdicts.
    pub malformed: u64,
    /// Human-readable load warnings (incomplete panels dropped, audits on
    /// non-MAT records discarded).
    pub warnings: Vec<String>,
}

/// Load VerdictRecords from JSONL. Records without exactly five votes are
/// dropped with a warning (the strict test is defined over complete 5-rater
/// pairs); audit verdicts on non-MAT-majority records are discarded with a
/// warning.
pub fn load_verdicts<R: BufRead>(reader: R) -> std::io::Result<VerdictLoad> {
    let mut out = VerdictLoad::default();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut rec: VerdictRecord = match serde_json::from_str(&line) {
            Ok(rec) => rec,
            Err(e) => {
                out.malformed += 1;
                out.warnings.push(format!("line {}: {e}", lineno + 1));
                continue;
            }
        };
        if rec.votes.len() != 5 {
            out.warnings.push(format!(
                "line {}: {}/{} has {} votes, expected 5; dropped",
                lineno + 1,
                rec.question_id,
                rec.vendor,
                rec.votes.len()
            ));
            continue;
        }
        if rec.audit.is_some()
            && panel_majority(&rec.votes)
                != Ok(PanelOutcome::Majority(Category::MateriallyDifferent))
        {
            out.warnings.push(format!(
                "line {}: {}/{} carries an audit verdict but is not panel-majority MAT; verdict discarded",
                lineno + 1,
                rec.question_id,
                rec.vendor
            ));
            rec.audit = None;
        }
        out.records.push(rec);
    }
    Ok(out)
}
