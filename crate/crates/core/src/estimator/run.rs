use crate::baselines::BaselineSummary;
use crate::graph::{prioritize_paths, CausalPath, PathSet};
use crate::predictor::QueryMeter;
use crate::report::{self, LeakageReport, ReportHeader, RunStatus, SkippedSubgroup};

use super::{
    EffectEstimate, Estimand, EstimateStatus, FuzzConfig, FuzzError, Fuzzer, Subgroup, MIN_PAIRS_PER_ESTIMATE,
    MIN_SUBGROUP_ROWS,
};

/// Fractions of a scope's pairs reserved for TOTAL and DIRECT; the rest goes
/// to paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetSplit {
    pub total: f64,
    pub direct: f64,
}

impl Default for BudgetSplit {
    fn default() -> Self {
        Self {
            total: 0.25,
            direct: 0.25,
        }
    }
}

/// Pairs per estimate within one scope.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Allocation {
    pub total: usize,
    pub direct: usize,
    pub paths: Vec<usize>,
}

/// Splits `queries` (two per pair) for one scope. Estimates that need no
/// queries get zero; each path gets a floor of [`MIN_PAIRS_PER_ESTIMATE`]
/// pairs plus a share of the remainder proportional to its priority. When
/// there are no paths to estimate their share goes to TOTAL, or to DIRECT.
/// Returns `None` if any estimate would fall below the floor.
pub fn allocate(
    queries: usize,
    need_total: bool,
    need_direct: bool,
    priorities: &[f64],
    split: BudgetSplit,
) -> Option<Allocation> {
    let pairs = queries / 2;
    let share = |f: f64| (pairs as f64 * f).floor() as usize;
    let mut total = if need_total { share(split.total) } else { 0 };
    let mut direct = if need_direct { share(split.direct) } else { 0 };
    let pool = pairs - total - direct;
    let mut paths = Vec::with_capacity(priorities.len());
    if priorities.is_empty() {
        if need_total {
            total += pool;
        } else if need_direct {
            direct += pool;
        }
    } else {
        let floors = MIN_PAIRS_PER_ESTIMATE * priorities.len();
        let extra = pool.checked_sub(floors)?;
        let weight: f64 = priorities.iter().sum();
        for &p in priorities {
            let frac = if weight > 0.0 { p / weight } else { 1.0 / priorities.len() as f64 };
            paths.push(MIN_PAIRS_PER_ESTIMATE + (extra as f64 * frac).floor() as usize);
        }
    }
    let short = |needed: bool, n: usize| needed && n < MIN_PAIRS_PER_ESTIMATE;
    if short(need_total, total) || short(need_direct, direct) {
        return None;
    }
    Some(Allocation { total, direct, paths })
}

/// Smallest per-scope query count `allocate` accepts.
fn minimum_queries(need_total: bool, need_direct: bool, priorities: &[f64], split: BudgetSplit) -> usize {
    let ok = |q: usize| allocate(q, need_total, need_direct, priorities, split).is_some();
    let mut hi = 2;
    while !ok(hi) {
        hi *= 2;
    }
    let mut lo = hi / 2;
    while lo + 1 < hi {
        let mid = (lo + hi) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// TOTAL, DIRECT and the top-k mediated paths by proxy strength, with
/// their priorities. The bare target-to-outcome path is DIRECT's.
pub(super) fn scope_estimands(config: &FuzzConfig<'_>) -> Result<Vec<Estimand>, FuzzError> {
    let (paths, _) = ranked_paths(config)?;
    let graph = config.graph();
    let mut out = vec![Estimand::total(graph, &config.target), Estimand::direct(&config.target)];
    out.extend(paths.iter().map(Estimand::path));
    Ok(out)
}

fn ranked_paths(config: &FuzzConfig<'_>) -> Result<(Vec<CausalPath>, Vec<f64>), FuzzError> {
    let graph = config.graph().with_target(&config.target)?;
    let mediated: Vec<CausalPath> = graph
        .enumerate_paths(config.max_path_length)?
        .paths
        .into_iter()
        .filter(|p| p.len_edges() > 1)
        .collect();
    if mediated.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let scored = prioritize_paths(&graph, &PathSet { paths: mediated }, config.reference, config.k)?;
    Ok(scored.into_iter().map(|s| (s.path, s.strength)).unzip())
}

/// Full run with a meter sized to `config.budget`.
pub fn run_causal_fuzz(config: &FuzzConfig<'_>) -> Result<LeakageReport, FuzzError> {
    let meter = QueryMeter::new(config.budget);
    run_causal_fuzz_with_meter(config, &meter)
}

/// Full run charging `meter`, which may be shared or smaller than the
/// configured budget. Exhaustion truncates estimates instead of failing.
pub fn run_causal_fuzz_with_meter(config: &FuzzConfig<'_>, meter: &QueryMeter) -> Result<LeakageReport, FuzzError> {
    config.validate()?;
    let fuzzer = Fuzzer::new(config, meter)?;
    let used_before = meter.used();
    let graph = config.graph().with_target(&config.target)?;
    let any_path = !graph.enumerate_paths(config.max_path_length)?.is_empty();
    let header = |used: usize| ReportHeader {
        target: config.target.clone(),
        model_id: config.predictor.model_id(),
        score_kind: config.score_kind.to_string(),
        threshold: config.threshold,
        budget: config.budget,
        budget_used: used,
        seed: config.seed,
        propagation: report::PROPAGATION_MODE.to_string(),
        averaging: report::AVERAGING.to_string(),
        contrast: config.contrast.to_string(),
    };
    let reads_target = config.predictor.schema().iter().any(|f| *f == config.target);
    if !any_path && !reads_target {
        return Ok(report::assemble(&[], BaselineSummary::default(), header(0), RunStatus::NoPath, Vec::new()));
    }

    let (paths, priorities) = ranked_paths(config)?;
    let total = Estimand::total(config.graph(), &config.target);
    let direct = Estimand::direct(&config.target);
    let need_total = !fuzzer.is_structural_zero(&total);
    let need_direct = !fuzzer.is_structural_zero(&direct);
    let path_estimands: Vec<Estimand> = paths.iter().map(Estimand::path).collect();
    let live: Vec<usize> = (0..paths.len())
        .filter(|&i| !fuzzer.is_structural_zero(&path_estimands[i]))
        .collect();
    let live_priorities: Vec<f64> = live.iter().map(|&i| priorities[i]).collect();

    let mut scopes: Vec<(Option<&Subgroup>, Vec<usize>)> = vec![(None, config.scope_rows(None)?)];
    let mut skipped = Vec::new();
    for s in &config.subgroups {
        let rows = config.scope_rows(Some(s))?;
        if rows.len() < MIN_SUBGROUP_ROWS {
            skipped.push(SkippedSubgroup {
                subgroup: s.label(),
                rows: rows.len(),
            });
        } else {
            scopes.push((Some(s), rows));
        }
    }

    let anything = need_total || need_direct || !live.is_empty();
    let per_scope = config.budget / scopes.len();
    let allocation = if anything {
        allocate(per_scope, need_total, need_direct, &live_priorities, config.split).ok_or_else(|| {
            FuzzError::BudgetTooSmall {
                budget: config.budget,
                needed: minimum_queries(need_total, need_direct, &live_priorities, config.split) * scopes.len(),
            }
        })?
    } else {
        Allocation::default()
    };

    let mut estimates: Vec<EffectEstimate> = Vec::new();
    for (subgroup, rows) in &scopes {
        estimates.push(fuzzer.estimate(&total, rows, allocation.total, *subgroup)?);
        estimates.push(fuzzer.estimate(&direct, rows, allocation.direct, *subgroup)?);
        let mut live_alloc = allocation.paths.iter();
        for e in &path_estimands {
            let n = if fuzzer.is_structural_zero(e) {
                0
            } else {
                *live_alloc.next().expect("one allocation per live path")
            };
            estimates.push(fuzzer.estimate(e, rows, n, *subgroup)?);
        }
    }
    let status = if estimates.iter().any(|e| e.status == EstimateStatus::Truncated) {
        RunStatus::BudgetExhausted
    } else {
        RunStatus::Ok
    };
    let used = meter.used() - used_before;
    Ok(report::assemble(&estimates, BaselineSummary::default(), header(used), status, skipped))
}
