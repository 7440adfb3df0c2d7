//! Ranked, versioned leakage reports: assembly, rendering, parsing, diffing.

mod diff;
mod render;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::diff::{diff, DiffError, EntryDelta, ReportDiff};
pub use self::render::{render, render_text, Format};
use crate::baselines::BaselineSummary;
use crate::estimator::{EffectEstimate, EstimateStatus};
use crate::graph::CausalPath;

pub const REPORT_VERSION: u32 = 1;
pub const PROPAGATION_MODE: &str = "residual-preserving, edge-activation";
pub const AVERAGING: &str = "empirical reference distribution";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Leak,
    Pass,
    Inconclusive,
    InconclusiveBudget,
    StructuralZero,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Leak => "leak",
            Verdict::Pass => "pass",
            Verdict::Inconclusive => "inconclusive",
            Verdict::InconclusiveBudget => "inconclusive-budget",
            Verdict::StructuralZero => "structural-zero",
        }
    }

    pub fn glyph(self) -> &'static str {
        match self {
            Verdict::Leak => "✗",
            Verdict::Pass => "✓",
            Verdict::Inconclusive => "?",
            Verdict::InconclusiveBudget => "…",
            Verdict::StructuralZero => "∅",
        }
    }
}

/// Leak if the whole interval is above `threshold`, pass if the whole
/// interval is below it. A truncated estimate can still establish a leak.
pub fn verdict(estimate: &EffectEstimate, threshold: f64) -> Verdict {
    let (low, high) = estimate.ci95;
    match estimate.status {
        EstimateStatus::StructuralZero => Verdict::StructuralZero,
        _ if low > threshold => Verdict::Leak,
        EstimateStatus::Truncated => Verdict::InconclusiveBudget,
        EstimateStatus::Complete if high < threshold => Verdict::Pass,
        EstimateStatus::Complete => Verdict::Inconclusive,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Ok,
    NoPath,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportHeader {
    pub target: String,
    pub model_id: String,
    pub score_kind: String,
    pub threshold: f64,
    pub budget: usize,
    pub budget_used: usize,
    pub seed: u64,
    pub propagation: String,
    pub averaging: String,
    pub contrast: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportEntry {
    pub path: String,
    pub effect: f64,
    pub ci: [f64; 2],
    pub signed_mean: f64,
    pub n_pairs: usize,
    pub queries: usize,
    pub verdict: Verdict,
    pub subgroup: Option<String>,
}

impl ReportEntry {
    pub fn key(&self) -> String {
        match &self.subgroup {
            Some(s) => format!("{} [{}]", self.path, s),
            None => self.path.clone(),
        }
    }

    /// Standard error recovered from the 95% interval width.
    pub fn std_error(&self) -> f64 {
        (self.ci[1] - self.ci[0]) / 3.92
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkippedSubgroup {
    pub subgroup: String,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overall {
    pub verdict: Verdict,
    pub status: RunStatus,
    pub flagged_mediators: Vec<String>,
    pub skipped_subgroups: Vec<SkippedSubgroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeakageReport {
    pub report_version: u32,
    pub header: ReportHeader,
    pub entries: Vec<ReportEntry>,
    pub baselines: BaselineSummary,
    pub overall: Overall,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("malformed report: {0}")]
    Malformed(String),
    #[error("unsupported report version {0}")]
    Version(u32),
}

/// Ranks entries by descending effect (ties by path, then subgroup),
/// derives verdicts, the overall verdict and flagged mediators.
pub fn assemble(
    estimates: &[EffectEstimate],
    baselines: BaselineSummary,
    header: ReportHeader,
    status: RunStatus,
    skipped_subgroups: Vec<SkippedSubgroup>,
) -> LeakageReport {
    let mut entries: Vec<ReportEntry> = estimates
        .iter()
        .map(|e| ReportEntry {
            path: e.path_label.clone(),
            effect: e.mean_abs_change,
            ci: [e.ci95.0, e.ci95.1],
            signed_mean: e.signed_mean,
            n_pairs: e.n_pairs,
            queries: e.queries_used,
            verdict: verdict(e, header.threshold),
            subgroup: e.subgroup_label.clone(),
        })
        .collect();
    sort_entries(&mut entries);
    let overall = Overall {
        verdict: overall_verdict(&entries),
        status,
        flagged_mediators: flagged_mediators(&entries),
        skipped_subgroups,
    };
    LeakageReport {
        report_version: REPORT_VERSION,
        header,
        entries,
        baselines,
        overall,
    }
}

pub fn sort_entries(entries: &mut [ReportEntry]) {
    entries.sort_by(|a, b| {
        b.effect
            .total_cmp(&a.effect)
            .then_with(|| a.path.cmp(&b.path))
            .then_with(|| a.subgroup.cmp(&b.subgroup))
    });
}

/// Leak iff any entry leaks; otherwise inconclusive if any entry is,
/// otherwise pass.
pub fn overall_verdict(entries: &[ReportEntry]) -> Verdict {
    if entries.iter().any(|e| e.verdict == Verdict::Leak) {
        Verdict::Leak
    } else if entries
        .iter()
        .any(|e| matches!(e.verdict, Verdict::Inconclusive | Verdict::InconclusiveBudget))
    {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    }
}

/// Interior nodes of leaking paths, ranked by the largest effect of any
/// leaking path through them.
pub fn flagged_mediators(entries: &[ReportEntry]) -> Vec<String> {
    let mut best: BTreeMap<String, f64> = BTreeMap::new();
    for e in entries.iter().filter(|e| e.verdict == Verdict::Leak) {
        for label in e.path.split(" + ") {
            let path = CausalPath::parse_label(label);
            if path.nodes().len() < 3 {
                continue;
            }
            for node in path.interior() {
                let slot = best.entry(node.clone()).or_insert(f64::NEG_INFINITY);
                *slot = slot.max(e.effect);
            }
        }
    }
    let mut ranked: Vec<(String, f64)> = best.into_iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.into_iter().map(|(n, _)| n).collect()
}

/// Strict parse: unknown fields and other versions are rejected.
pub fn parse(text: &str) -> Result<LeakageReport, ReportError> {
    let report: LeakageReport = serde_json::from_str(text).map_err(|e| ReportError::Malformed(e.to_string()))?;
    if report.report_version != REPORT_VERSION {
        return Err(ReportError::Version(report.report_version));
    }
    Ok(report)
}
