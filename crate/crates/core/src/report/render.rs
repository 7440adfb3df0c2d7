use std::fmt::Write;
use std::str::FromStr;

use super::LeakageReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Text,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Format::Json),
            "text" => Ok(Format::Text),
            other => Err(format!("unknown format `{other}` (expected json|text)")),
        }
    }
}

/// Byte-deterministic rendering; JSON keys follow declaration order.
pub fn render(report: &LeakageReport, format: Format) -> String {
    match format {
        Format::Json => {
            let mut out = serde_json::to_string_pretty(report).expect("report serializes");
            out.push('\n');
            out
        }
        Format::Text => render_text(report),
    }
}

pub fn render_text(report: &LeakageReport) -> String {
    let h = &report.header;
    let mut out = String::new();
    let _ = writeln!(out, "leakage report v{}", report.report_version);
    let _ = writeln!(
        out,
        "target {}  model {}  score {}  threshold {}",
        h.target, h.model_id, h.score_kind, h.threshold
    );
    let _ = writeln!(
        out,
        "budget {}/{}  seed {}  contrast {}",
        h.budget_used, h.budget, h.seed, h.contrast
    );
    let _ = writeln!(out, "propagation {}; averaging over {}", h.propagation, h.averaging);
    let o = &report.overall;
    let _ = writeln!(
        out,
        "overall {} {} ({})",
        o.verdict.glyph(),
        o.verdict.as_str().to_uppercase(),
        serde_json::to_value(o.status).expect("status serializes").as_str().unwrap_or_default()
    );
    if !o.flagged_mediators.is_empty() {
        let _ = writeln!(out, "flagged mediators: {}", o.flagged_mediators.join(", "));
    }
    for s in &o.skipped_subgroups {
        let _ = writeln!(out, "skipped subgroup {} ({} rows)", s.subgroup, s.rows);
    }
    out.push('\n');
    if report.entries.is_empty() {
        out.push_str("no paths\n");
    } else {
        let _ = writeln!(
            out,
            "  {:<20} {:>9} {:>21} {:>10} {:>7}  path",
            "verdict", "effect", "ci95", "signed", "pairs"
        );
        for e in &report.entries {
            let _ = writeln!(
                out,
                "{} {:<20} {:>9.4} [{:>9.4}, {:>9.4}] {:>+10.4} {:>7}  {}",
                e.verdict.glyph(),
                e.verdict.as_str(),
                e.effect,
                e.ci[0],
                e.ci[1],
                e.signed_mean,
                e.n_pairs,
                e.key()
            );
        }
    }
    let b = &report.baselines;
    if b.permutation_importance.is_some() || b.shapley.is_some() || b.demographic_parity.is_some() {
        out.push_str("\nbaselines\n");
    }
    if let Some(p) = &b.permutation_importance {
        if p.structural_zero {
            let _ = writeln!(out, "  permutation importance of {}: structural zero (not in model)", p.feature);
        } else {
            let _ = writeln!(
                out,
                "  permutation importance of {} ({}): {:.4} ± {:.4} over {} repeats",
                p.feature,
                p.metric.as_str(),
                p.mean_drop,
                p.std,
                p.repeats
            );
        }
    }
    if let Some(s) = &b.shapley {
        if s.structural_zero {
            let _ = writeln!(out, "  shapley value of {}: structural zero (not in model)", s.feature);
        } else {
            let _ = writeln!(
                out,
                "  mean |shapley value| of {}: {:.4} over {} rows",
                s.feature, s.mean_abs_value, s.rows
            );
        }
    }
    if let Some(d) = &b.demographic_parity {
        let _ = writeln!(
            out,
            "  demographic parity gap by {} at {}: {:.4}",
            d.group, d.threshold, d.gap
        );
    }
    out
}
