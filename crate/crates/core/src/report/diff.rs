use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;
use thiserror::Error;

use super::{LeakageReport, ReportEntry, Verdict};

#[derive(Debug, Error, PartialEq)]
pub enum DiffError {
    #[error("target mismatch: `{old}` vs `{new}`")]
    TargetMismatch { old: String, new: String },
    #[error("threshold mismatch: {old} vs {new}")]
    ThresholdMismatch { old: f64, new: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryDelta {
    pub entry: String,
    pub old_effect: f64,
    pub new_effect: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ReportDiff {
    /// Entries present in both reports whose effect changed.
    pub deltas: Vec<EntryDelta>,
    pub new_leaks: Vec<String>,
    pub resolved_leaks: Vec<String>,
    /// Effect increases beyond twice the pooled standard error.
    pub regressions: Vec<String>,
}

impl ReportDiff {
    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty() && self.new_leaks.is_empty() && self.resolved_leaks.is_empty() && self.regressions.is_empty()
    }

    /// True when the new report is worse: a new leak or a regression.
    pub fn is_worse(&self) -> bool {
        !self.new_leaks.is_empty() || !self.regressions.is_empty()
    }

    pub fn render_text(&self) -> String {
        if self.is_empty() {
            return "no differences\n".to_string();
        }
        let mut out = String::new();
        for (title, items) in [
            ("new leaks", &self.new_leaks),
            ("resolved leaks", &self.resolved_leaks),
            ("regressions", &self.regressions),
        ] {
            if !items.is_empty() {
                let _ = writeln!(out, "{title}:");
                for i in items {
                    let _ = writeln!(out, "  {i}");
                }
            }
        }
        if !self.deltas.is_empty() {
            let _ = writeln!(out, "effect changes:");
            for d in &self.deltas {
                let _ = writeln!(
                    out,
                    "  {}: {:.4} -> {:.4} ({:+.4})",
                    d.entry, d.old_effect, d.new_effect, d.delta
                );
            }
        }
        out
    }
}

/// Compares two reports entry by entry (keyed by path and subgroup).
pub fn diff(old: &LeakageReport, new: &LeakageReport) -> Result<ReportDiff, DiffError> {
    if old.header.target != new.header.target {
        return Err(DiffError::TargetMismatch {
            old: old.header.target.clone(),
            new: new.header.target.clone(),
        });
    }
    if old.header.threshold != new.header.threshold {
        return Err(DiffError::ThresholdMismatch {
            old: old.header.threshold,
            new: new.header.threshold,
        });
    }
    let index = |r: &LeakageReport| -> BTreeMap<String, ReportEntry> {
        r.entries.iter().map(|e| (e.key(), e.clone())).collect()
    };
    let (before, after) = (index(old), index(new));
    let mut out = ReportDiff::default();
    for (key, n) in &after {
        let o = before.get(key);
        if n.verdict == Verdict::Leak && o.map_or(true, |o| o.verdict != Verdict::Leak) {
            out.new_leaks.push(key.clone());
        }
        if let Some(o) = o {
            let delta = n.effect - o.effect;
            if delta != 0.0 {
                out.deltas.push(EntryDelta {
                    entry: key.clone(),
                    old_effect: o.effect,
                    new_effect: n.effect,
                    delta,
                });
            }
            let pooled = (o.std_error().powi(2) + n.std_error().powi(2)).sqrt();
            if delta > 2.0 * pooled {
                out.regressions.push(key.clone());
            }
        }
    }
    for (key, o) in &before {
        if o.verdict == Verdict::Leak && after.get(key).map_or(true, |n| n.verdict != Verdict::Leak) {
            out.resolved_leaks.push(key.clone());
        }
    }
    Ok(out)
}
