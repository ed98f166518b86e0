//! Redundancy metrics: multiplicity ρ, reduction fractions, byte/token
//! reduction percentages, and distribution summaries.
//!
//! Conventions, fixed for regression comparison:
//! * ρ = total / unique, a dimensionless ratio in [1, ∞); the corresponding
//!   reduction fraction is 1 − 1/ρ.
//! * Percentages render to 2 decimals, ratios to 4.
//! * Median is the lower-interpolation quantile at 0.5 (sorted[(n−1)/2]);
//!   p95 is the nearest-rank quantile (sorted[⌈95n/100⌉ − 1], integer
//!   arithmetic).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("unique count is zero with {total} total items")]
    ZeroUnique { total: u64 },
    #[error("total {total} is below unique {unique}")]
    TotalBelowUnique { total: u64, unique: u64 },
    #[error("rho {0} is below one")]
    RhoBelowOne(f64),
    #[error("raw byte count is zero")]
    ZeroRaw,
    #[error("deduplicated bytes {dedup} exceed raw bytes {raw}")]
    DedupExceedsRaw { raw: u64, dedup: u64 },
}

/// Multiplicity ρ = total / unique.
pub fn multiplicity(total: u64, unique: u64) -> Result<f64, MetricsError> {
    if unique == 0 {
        return Err(MetricsError::ZeroUnique { total });
    }
    if total < unique {
        return Err(MetricsError::TotalBelowUnique { total, unique });
    }
    Ok(total as f64 / unique as f64)
}

/// Reduction fraction 1 − 1/ρ.
pub fn reduction_fraction(rho: f64) -> Result<f64, MetricsError> {
    if rho < 1.0 {
        return Err(MetricsError::RhoBelowOne(rho));
    }
    Ok(1.0 - 1.0 / rho)
}

/// 100 · (1 − dedup/raw).
pub fn byte_reduction_pct(raw_bytes: u64, dedup_bytes: u64) -> Result<f64, MetricsError> {
    if raw_bytes == 0 {
        return Err(MetricsError::ZeroRaw);
    }
    if dedup_bytes > raw_bytes {
        return Err(MetricsError::DedupExceedsRaw {
            raw: raw_bytes,
            dedup: dedup_bytes,
        });
    }
    Ok(100.0 * (1.0 - dedup_bytes as f64 / raw_bytes as f64))
}

/// Deterministic whitespace/punctuation token approximation.
///
/// Rule (fixed; independent of any vendor tokenizer): split the payload into
/// segments on runs of ASCII whitespace; within each segment count the
/// maximal runs of non-punctuation bytes (ASCII punctuation delimits
/// subwords); a segment consisting entirely of punctuation counts as one
/// token. Bytes ≥ 0x80 are treated as word bytes.
pub fn approx_token_count(payload: &[u8]) -> u64 {
    let mut tokens = 0u64;
    for segment in payload.split(|b| b.is_ascii_whitespace()) {
        if segment.is_empty() {
            continue;
        }
        let subwords = segment
            .split(|b| b.is_ascii_punctuation())
            .filter(|run| !run.is_empty())
            .count() as u64;
        tokens += subwords.max(1);
    }
    tokens
}

/// Corpus-level reduction aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionStats {
    pub total_items: u64,
    pub unique_items: u64,
    /// total / unique; `None` when no survivors are attributed (a source
    /// fully shadowed by earlier sources, or an empty source).
    pub rho: Option<f64>,
    /// 1 − unique/total; 0.0 for an empty slice.
    pub item_reduction_fraction: f64,
    pub raw_bytes: u64,
    pub dedup_bytes: u64,
    /// 0.0 when raw_bytes = 0 (nothing to reduce).
    pub byte_reduction_pct: f64,
    pub raw_tokens: u64,
    pub dedup_tokens: u64,
    pub token_reduction_pct: f64,
}

impl ReductionStats {
    /// Total function over any consistent counts; the documented edge rules
    /// above apply where the strict operations would reject the input.
    pub fn compute(
        total_items: u64,
        unique_items: u64,
        raw_bytes: u64,
        dedup_bytes: u64,
        raw_tokens: u64,
        dedup_tokens: u64,
    ) -> Self {
        let rho = multiplicity(total_items, unique_items).ok();
        let item_reduction_fraction = if total_items == 0 {
            0.0
        } else {
            1.0 - unique_items as f64 / total_items as f64
        };
        let byte_reduction_pct = byte_reduction_pct(raw_bytes, dedup_bytes).unwrap_or(0.0);
        let token_reduction_pct = byte_reduction_pct_tokens(raw_tokens, dedup_tokens);
        Self {
            total_items,
            unique_items,
            rho,
            item_reduction_fraction,
            raw_bytes,
            dedup_bytes,
            byte_reduction_pct,
            raw_tokens,
            dedup_tokens,
            token_reduction_pct,
        }
    }
}

fn byte_reduction_pct_tokens(raw: u64, dedup: u64) -> f64 {
    if raw == 0 {
        0.0
    } else {
        100.0 * (1.0 - dedup as f64 / raw as f64)
    }
}

/// n / mean / median / p95 / max of a sample, in the sample's unit.
/// The EMPTY marker is `None` at the call sites ([`summarize`] returns
/// `Option`), never NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
    pub max: f64,
}

/// Summarize a sample. Empty input yields `None`.
pub fn summarize(samples: &[f64]) -> Option<DistributionSummary> {
    if samples.is_empty() {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let median = sorted[(n - 1) / 2];
    let p95_rank = (95 * n).div_ceil(100).max(1);
    let p95 = sorted[p95_rank - 1];
    let max = sorted[n - 1];
    Some(DistributionSummary {
        n,
        mean,
        median,
        p95,
        max,
    })
}

/// Render a percentage at the fixed 2-decimal table precision.
pub fn render_pct(x: f64) -> String {
    format!("{x:.2}")
}

/// Render a ratio at the fixed 4-decimal table precision.
pub fn render_ratio(x: f64) -> String {
    format!("{x:.4}")
}
