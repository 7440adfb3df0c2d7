//! Monte-Carlo estimation of residual influence under a query budget.
//!
//! Every estimate compares model scores on an observed reference row and on
//! its counterfactual. Feature values follow the SEM along the estimand's
//! active edges; the model then reads the counterfactual value of a schema
//! feature only when that feature's implicit edge into the outcome is active.
//! TOTAL activates everything downstream of the target, DIRECT only the
//! target's own input, and a path only its edges plus its last mediator's
//! input.

mod predicate;
mod run;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::predicate::{CmpOp, Subgroup};
pub use self::run::{allocate, run_causal_fuzz, run_causal_fuzz_with_meter, Allocation, BudgetSplit};
use crate::data::Dataset;
use crate::graph::{CausalGraph, CausalPath, GraphError, NodeKind, Role, DEFAULT_MAX_PATH_LENGTH};
use crate::predictor::{predict, PredictError, Predictor, QueryMeter, ScoreKind, MAX_WIRE_BATCH};
use crate::scm::{BoundSem, EdgeMask, FittedSem, SemError};
use crate::stats;

pub const TOTAL_LABEL: &str = "TOTAL";
pub const DIRECT_LABEL: &str = "DIRECT";
pub const DEFAULT_THRESHOLD: f64 = 0.05;
pub const MIN_PAIRS_PER_ESTIMATE: usize = 20;
pub const MIN_SUBGROUP_ROWS: usize = 30;
const Z95: f64 = 1.96;

#[derive(Debug, Error)]
pub enum FuzzError {
    #[error("threshold must be positive and finite, got {0}")]
    InvalidThreshold(f64),
    #[error("budget {budget} too small: {needed} queries needed for {MIN_PAIRS_PER_ESTIMATE} pairs per estimate")]
    BudgetTooSmall { budget: usize, needed: usize },
    #[error("target `{0}` is not a feature node of the graph")]
    UnknownTarget(String),
    #[error("flip contrast requires a binary target, `{0}` is continuous")]
    FlipNeedsBinary(String),
    #[error("contrast delta must be nonzero and finite")]
    ZeroDelta,
    #[error("contrasts per row must be at least 1")]
    ZeroContrasts,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("column `{0}` missing from reference data")]
    MissingColumn(String),
    #[error("reference data has no rows")]
    EmptyReference,
    #[error("subgroup `{label}` selects {rows} rows, at least {MIN_SUBGROUP_ROWS} needed")]
    SubgroupTooSmall { label: String, rows: usize },
    #[error("budget split fractions must be in [0, 1] and sum to at most 1")]
    InvalidSplit,
    #[error("path `{0}` is not a target-to-outcome path of the graph")]
    UnknownPath(String),
    #[error("invalid contrast policy `{0}`")]
    BadContrast(String),
    #[error(transparent)]
    Sem(#[from] SemError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Predict(#[from] PredictError),
}

impl FuzzError {
    /// True for errors detected before any model query.
    pub fn is_config(&self) -> bool {
        !matches!(self, FuzzError::Predict(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContrastMode {
    /// z' = 1 - z; binary targets only.
    Flip,
    /// z' drawn from the reference marginal of the target.
    MarginalResample,
    /// z' = z + delta.
    FixedDelta(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastPolicy {
    pub mode: ContrastMode,
    pub n_contrasts_per_row: usize,
}

impl ContrastPolicy {
    pub fn new(mode: ContrastMode) -> Self {
        Self {
            mode,
            n_contrasts_per_row: 1,
        }
    }

    /// Flip for binary targets, marginal resampling otherwise.
    pub fn default_for(kind: NodeKind) -> Self {
        Self::new(match kind {
            NodeKind::Binary => ContrastMode::Flip,
            NodeKind::Continuous => ContrastMode::MarginalResample,
        })
    }

    pub fn fixed_delta(delta: f64) -> Self {
        Self::new(ContrastMode::FixedDelta(delta))
    }
}

impl fmt::Display for ContrastPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mode {
            ContrastMode::Flip => f.write_str("flip")?,
            ContrastMode::MarginalResample => f.write_str("marginal")?,
            ContrastMode::FixedDelta(d) => write!(f, "delta:{d}")?,
        }
        if self.n_contrasts_per_row != 1 {
            write!(f, "x{}", self.n_contrasts_per_row)?;
        }
        Ok(())
    }
}

impl FromStr for ContrastPolicy {
    type Err = FuzzError;

    /// `flip`, `marginal` or `delta:<number>`, optionally suffixed `x<count>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || FuzzError::BadContrast(s.to_string());
        let (mode, count) = match s.rsplit_once('x') {
            Some((m, c)) if !c.is_empty() && c.chars().all(|ch| ch.is_ascii_digit()) => {
                (m, c.parse().map_err(|_| bad())?)
            }
            _ => (s, 1),
        };
        let mode = match mode {
            "flip" => ContrastMode::Flip,
            "marginal" => ContrastMode::MarginalResample,
            other => {
                let d = other.strip_prefix("delta:").ok_or_else(bad)?;
                ContrastMode::FixedDelta(d.parse().map_err(|_| bad())?)
            }
        };
        Ok(Self {
            mode,
            n_contrasts_per_row: count,
        })
    }
}

/// Which model inputs take their counterfactual value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelInputs {
    All,
    Only(BTreeSet<String>),
}

/// What to estimate: a label, the active feature edges, and the model inputs
/// whose implicit edge into the outcome is active.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Estimand {
    pub label: String,
    pub edges: BTreeSet<(String, String)>,
    pub inputs: ModelInputs,
}

impl Estimand {
    /// Full propagation: every edge leaving the target or its descendants.
    pub fn total(graph: &CausalGraph, target: &str) -> Self {
        let mut reach = graph.descendants(target);
        reach.insert(target.to_string());
        let edges = graph
            .edges()
            .iter()
            .filter(|(a, b)| reach.contains(a) && b != graph.outcome())
            .cloned()
            .collect();
        Self {
            label: TOTAL_LABEL.to_string(),
            edges,
            inputs: ModelInputs::All,
        }
    }

    /// Only the target's own value changes.
    pub fn direct(target: &str) -> Self {
        Self {
            label: DIRECT_LABEL.to_string(),
            edges: BTreeSet::new(),
            inputs: ModelInputs::Only(BTreeSet::from([target.to_string()])),
        }
    }

    pub fn path(path: &CausalPath) -> Self {
        Self::paths(std::slice::from_ref(path))
    }

    /// Union of paths; the label joins the path labels with ` + `.
    pub fn paths(paths: &[CausalPath]) -> Self {
        let mut edges = BTreeSet::new();
        let mut inputs = BTreeSet::new();
        for p in paths {
            let n = p.nodes().len();
            for (a, b) in p.edges().take(n.saturating_sub(2)) {
                edges.insert((a.to_string(), b.to_string()));
            }
            if n >= 2 {
                inputs.insert(p.nodes()[n - 2].clone());
            }
        }
        Self {
            label: paths.iter().map(CausalPath::label).collect::<Vec<_>>().join(" + "),
            edges,
            inputs: ModelInputs::Only(inputs),
        }
    }

    fn reads(&self, feature: &str) -> bool {
        match &self.inputs {
            ModelInputs::All => true,
            ModelInputs::Only(set) => set.contains(feature),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateStatus {
    Complete,
    /// Budget ran out before all planned pairs were scored.
    Truncated,
    /// The model cannot see any changed input; zero without queries.
    StructuralZero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectEstimate {
    pub path_label: String,
    pub subgroup_label: Option<String>,
    pub mean_abs_change: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
    pub signed_mean: f64,
    pub signed_std_error: f64,
    pub signed_ci95: (f64, f64),
    pub n_pairs: usize,
    pub planned_pairs: usize,
    /// One original and one counterfactual score per pair. Original scores
    /// are cached per reference row, so the meter may be charged less.
    pub queries_used: usize,
    pub status: EstimateStatus,
}

impl EffectEstimate {
    /// `diffs` holds `(score change, direction of the target's move)` per
    /// pair; the signed statistics are oriented so that a positive value
    /// means the score rises when the target increases.
    fn from_diffs(
        label: &str,
        subgroup: Option<String>,
        diffs: &[(f64, f64)],
        planned: usize,
        status: EstimateStatus,
    ) -> Self {
        let abs: Vec<f64> = diffs.iter().map(|(d, _)| d.abs()).collect();
        let oriented: Vec<f64> = diffs.iter().map(|(d, dir)| d * dir).collect();
        let (mean_abs, se_abs) = mean_and_se(&abs);
        let (signed, se_signed) = mean_and_se(&oriented);
        Self {
            path_label: label.to_string(),
            subgroup_label: subgroup,
            mean_abs_change: mean_abs,
            std_error: se_abs,
            ci95: (mean_abs - Z95 * se_abs, mean_abs + Z95 * se_abs),
            signed_mean: signed,
            signed_std_error: se_signed,
            signed_ci95: (signed - Z95 * se_signed, signed + Z95 * se_signed),
            n_pairs: diffs.len(),
            planned_pairs: planned,
            queries_used: 2 * diffs.len(),
            status,
        }
    }

    fn structural_zero(label: &str, subgroup: Option<String>) -> Self {
        Self::from_diffs(label, subgroup, &[], 0, EstimateStatus::StructuralZero)
    }
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    match xs.len() {
        0 => (0.0, 0.0),
        1 => (xs[0], 0.0),
        _ => (stats::mean(xs), stats::std_error(xs)),
    }
}

/// Everything a fuzz run needs.
#[derive(Clone)]
pub struct FuzzConfig<'a> {
    pub sem: &'a FittedSem,
    pub predictor: &'a dyn Predictor,
    /// Reference rows over which effects are averaged.
    pub reference: &'a Dataset,
    pub target: String,
    pub threshold: f64,
    pub budget: usize,
    pub k: usize,
    pub contrast: ContrastPolicy,
    pub score_kind: ScoreKind,
    pub subgroups: Vec<Subgroup>,
    pub seed: u64,
    pub split: BudgetSplit,
    pub max_path_length: usize,
}

impl<'a> FuzzConfig<'a> {
    /// Defaults: target from the graph, τ = 0.05, k = 5, default contrast
    /// for the target's kind, probability scores, seed 0.
    pub fn new(sem: &'a FittedSem, predictor: &'a dyn Predictor, reference: &'a Dataset, budget: usize) -> Self {
        let target = sem.graph().target().unwrap_or_default().to_string();
        let kind = sem.graph().node(&target).map(|n| n.kind).unwrap_or_default();
        Self {
            sem,
            predictor,
            reference,
            target,
            threshold: DEFAULT_THRESHOLD,
            budget,
            k: 5,
            contrast: ContrastPolicy::default_for(kind),
            score_kind: ScoreKind::Probability,
            subgroups: Vec::new(),
            seed: 0,
            split: BudgetSplit::default(),
            max_path_length: DEFAULT_MAX_PATH_LENGTH,
        }
    }

    pub fn graph(&self) -> &'a CausalGraph {
        self.sem.graph()
    }

    /// Checks everything that does not depend on budget allocation.
    pub fn validate(&self) -> Result<(), FuzzError> {
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err(FuzzError::InvalidThreshold(self.threshold));
        }
        if self.k == 0 {
            return Err(FuzzError::ZeroK);
        }
        let (t, d) = (self.split.total, self.split.direct);
        if !((0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&d) && t + d <= 1.0) {
            return Err(FuzzError::InvalidSplit);
        }
        let graph = self.graph();
        let node = graph
            .node(&self.target)
            .filter(|n| n.role != Role::Outcome)
            .ok_or_else(|| FuzzError::UnknownTarget(self.target.clone()))?;
        match self.contrast.mode {
            ContrastMode::Flip if node.kind != NodeKind::Binary => {
                return Err(FuzzError::FlipNeedsBinary(self.target.clone()))
            }
            ContrastMode::FixedDelta(d) if d == 0.0 || !d.is_finite() => return Err(FuzzError::ZeroDelta),
            _ => {}
        }
        if self.contrast.n_contrasts_per_row == 0 {
            return Err(FuzzError::ZeroContrasts);
        }
        if self.reference.is_empty() {
            return Err(FuzzError::EmptyReference);
        }
        for name in self.predictor.schema() {
            self.reference
                .column_index(name)
                .ok_or_else(|| FuzzError::MissingColumn(name.clone()))?;
        }
        for s in &self.subgroups {
            self.reference
                .column_index(&s.column)
                .ok_or_else(|| FuzzError::MissingColumn(s.column.clone()))?;
        }
        Ok(())
    }

    /// Reference rows satisfying `subgroup` (all rows for `None`).
    pub fn scope_rows(&self, subgroup: Option<&Subgroup>) -> Result<Vec<usize>, FuzzError> {
        let Some(s) = subgroup else {
            return Ok((0..self.reference.n_rows()).collect());
        };
        let c = self
            .reference
            .column_index(&s.column)
            .ok_or_else(|| FuzzError::MissingColumn(s.column.clone()))?;
        Ok(self
            .reference
            .rows()
            .iter()
            .enumerate()
            .filter(|(_, r)| s.matches(r[c]))
            .map(|(i, _)| i)
            .collect())
    }
}

/// Estimation engine for one run; holds the original-score cache.
pub struct Fuzzer<'a> {
    config: &'a FuzzConfig<'a>,
    meter: &'a QueryMeter,
    bound: BoundSem<'a>,
    target_col: usize,
    schema_cols: Vec<usize>,
    marginal: Vec<f64>,
    cache: Mutex<HashMap<usize, f64>>,
}

impl<'a> Fuzzer<'a> {
    pub fn new(config: &'a FuzzConfig<'a>, meter: &'a QueryMeter) -> Result<Self, FuzzError> {
        config.validate()?;
        let names = config.reference.names();
        let bound = BoundSem::bind(config.sem, &names)?;
        let target_col = bound.assignment_column(&config.target)?;
        let schema_cols = config
            .predictor
            .schema()
            .iter()
            .map(|n| config.reference.column_index(n).expect("validated"))
            .collect();
        let marginal = config.reference.column(&config.target).expect("bound column");
        Ok(Self {
            config,
            meter,
            bound,
            target_col,
            schema_cols,
            marginal,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &FuzzConfig<'a> {
        self.config
    }

    /// Whether any input the estimand lets the model see can change.
    pub fn is_structural_zero(&self, estimand: &Estimand) -> bool {
        let graph = self.config.graph();
        let target = self.config.target.as_str();
        let mut movable = graph.descendants(target);
        movable.insert(target.to_string());
        !self
            .config
            .predictor
            .schema()
            .iter()
            .any(|f| estimand.reads(f) && movable.contains(f))
    }

    /// Scores up to `n_pairs` counterfactual pairs drawn from `rows`.
    pub fn estimate(
        &self,
        estimand: &Estimand,
        rows: &[usize],
        n_pairs: usize,
        subgroup: Option<&Subgroup>,
    ) -> Result<EffectEstimate, FuzzError> {
        let label = subgroup.map(Subgroup::label);
        if self.is_structural_zero(estimand) {
            return Ok(EffectEstimate::structural_zero(&estimand.label, label));
        }
        if rows.is_empty() {
            return Err(FuzzError::EmptyReference);
        }
        let mask = self.bound.mask(&estimand.edges)?;
        let reads: Vec<bool> = self
            .config
            .predictor
            .schema()
            .iter()
            .map(|f| estimand.reads(f))
            .collect();
        let stream = label_hash(&estimand.label);

        let mut diffs = Vec::with_capacity(n_pairs);
        let mut truncated = false;
        let mut start = 0;
        while start < n_pairs && !truncated {
            let end = (start + MAX_WIRE_BATCH / 2).min(n_pairs);
            let pairs: Vec<Pair> = (start..end)
                .into_par_iter()
                .map(|i| self.pair(i, stream, rows, &mask, &reads))
                .collect();
            let (scored, cut) = self.score_pairs(&pairs)?;
            diffs.extend(scored);
            truncated = cut;
            start = end;
        }
        let status = if diffs.len() < n_pairs {
            EstimateStatus::Truncated
        } else {
            EstimateStatus::Complete
        };
        Ok(EffectEstimate::from_diffs(&estimand.label, label, &diffs, n_pairs, status))
    }

    /// Reference row index, model-input counterfactual and direction of
    /// the target's move for pair `i`.
    fn pair(&self, i: usize, stream: u64, rows: &[usize], mask: &EdgeMask, reads: &[bool]) -> Pair {
        let seed = self.config.seed;
        let per_row = self.config.contrast.n_contrasts_per_row as u64;
        let mut row_rng = ChaCha8Rng::seed_from_u64(mix(&[seed, stream, ROW_STREAM, i as u64 / per_row]));
        let r = rows[row_rng.gen_range(0..rows.len())];
        let mut rng = ChaCha8Rng::seed_from_u64(mix(&[seed, stream, CONTRAST_STREAM, i as u64]));
        let observed = self.config.reference.row(r);
        let z = observed[self.target_col];
        let z_new = match self.config.contrast.mode {
            ContrastMode::Flip => 1.0 - z,
            ContrastMode::MarginalResample => self.marginal[rng.gen_range(0..self.marginal.len())],
            ContrastMode::FixedDelta(d) => z + d,
        };
        let cf = self.bound.counterfactual(observed, mask, &[(self.target_col, z_new)]);
        let input = self
            .schema_cols
            .iter()
            .zip(reads)
            .map(|(&c, &on)| if on { cf[c] } else { observed[c] })
            .collect();
        let direction = match z_new.partial_cmp(&z) {
            Some(std::cmp::Ordering::Greater) => 1.0,
            Some(std::cmp::Ordering::Less) => -1.0,
            _ => 0.0,
        };
        (r, input, direction)
    }

    fn original_input(&self, r: usize) -> Vec<f64> {
        let row = self.config.reference.row(r);
        self.schema_cols.iter().map(|&c| row[c]).collect()
    }

    /// Scores as many leading pairs as the meter allows. Returns the score
    /// differences and whether the budget cut the batch short.
    fn score_pairs(&self, pairs: &[Pair]) -> Result<(Vec<(f64, f64)>, bool), FuzzError> {
        let mut cache = self.cache.lock().expect("cache lock");
        let mut remaining = self.meter.remaining();
        let mut fresh: Vec<usize> = Vec::new();
        let mut take = 0;
        for (r, ..) in pairs {
            let needs_original = !cache.contains_key(r) && !fresh.contains(r);
            let cost = 1 + usize::from(needs_original);
            if cost > remaining {
                break;
            }
            remaining -= cost;
            if needs_original {
                fresh.push(*r);
            }
            take += 1;
        }
        if take == 0 {
            return Ok((Vec::new(), !pairs.is_empty()));
        }
        let mut batch: Vec<Vec<f64>> = fresh.iter().map(|&r| self.original_input(r)).collect();
        batch.extend(pairs[..take].iter().map(|(_, x, _)| x.clone()));
        let scores = match predict(self.config.predictor, &batch, self.config.score_kind, self.meter) {
            Ok(s) => s,
            Err(PredictError::BudgetExhausted { .. }) => return Ok((Vec::new(), true)),
            Err(e) => return Err(e.into()),
        };
        for (&r, &s) in fresh.iter().zip(&scores) {
            cache.insert(r, s);
        }
        let diffs = pairs[..take]
            .iter()
            .zip(&scores[fresh.len()..])
            .map(|((r, _, dir), &s)| (s - cache[r], *dir))
            .collect();
        Ok((diffs, take < pairs.len()))
    }
}

type Pair = (usize, Vec<f64>, f64);

const ROW_STREAM: u64 = 0x524f_5753;
const CONTRAST_STREAM: u64 = 0x4354_5253;

/// FNV-1a over the label bytes.
fn label_hash(label: &str) -> u64 {
    label
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub(crate) fn mix(parts: &[u64]) -> u64 {
    parts.iter().fold(0, |h, &p| splitmix64(h ^ splitmix64(p)))
}

/// Estimates the effect transmitted along `paths` over all reference rows.
pub fn estimate_path_effect(
    config: &FuzzConfig<'_>,
    paths: &[CausalPath],
    n_pairs: usize,
    meter: &QueryMeter,
) -> Result<EffectEstimate, FuzzError> {
    let all = config.graph().enumerate_paths(config.max_path_length.max(longest(paths)))?;
    if let Some(p) = paths.iter().find(|p| !all.paths.contains(p)) {
        return Err(FuzzError::UnknownPath(p.label()));
    }
    estimate_with(config, &Estimand::paths(paths), n_pairs, meter, None)
}

fn longest(paths: &[CausalPath]) -> usize {
    paths.iter().map(CausalPath::len_edges).max().unwrap_or(0)
}

pub fn estimate_total_effect(config: &FuzzConfig<'_>, n_pairs: usize, meter: &QueryMeter) -> Result<EffectEstimate, FuzzError> {
    estimate_with(config, &Estimand::total(config.graph(), &config.target), n_pairs, meter, None)
}

/// Zero with no queries, flagged structural zero, when the model does not
/// read the target.
pub fn estimate_direct_effect(config: &FuzzConfig<'_>, n_pairs: usize, meter: &QueryMeter) -> Result<EffectEstimate, FuzzError> {
    estimate_with(config, &Estimand::direct(&config.target), n_pairs, meter, None)
}

/// TOTAL, DIRECT and each of the top-k mediated paths, restricted to rows
/// satisfying `subgroup`.
pub fn estimate_subgroup_effects(
    config: &FuzzConfig<'_>,
    subgroup: &Subgroup,
    n_pairs: usize,
    meter: &QueryMeter,
) -> Result<Vec<EffectEstimate>, FuzzError> {
    let fuzzer = Fuzzer::new(config, meter)?;
    let rows = config.scope_rows(Some(subgroup))?;
    if rows.len() < MIN_SUBGROUP_ROWS {
        return Err(FuzzError::SubgroupTooSmall {
            label: subgroup.label(),
            rows: rows.len(),
        });
    }
    run::scope_estimands(config)?
        .iter()
        .map(|e| fuzzer.estimate(e, &rows, n_pairs, Some(subgroup)))
        .collect()
}

fn estimate_with(
    config: &FuzzConfig<'_>,
    estimand: &Estimand,
    n_pairs: usize,
    meter: &QueryMeter,
    subgroup: Option<&Subgroup>,
) -> Result<EffectEstimate, FuzzError> {
    let fuzzer = Fuzzer::new(config, meter)?;
    let rows = config.scope_rows(subgroup)?;
    fuzzer.estimate(estimand, &rows, n_pairs, subgroup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeSpec;
    use crate::predictor::LinearModel;
    use crate::report::{RunStatus, Verdict};
    use crate::scm::{sample_synthetic, StructuralEquation};

    /// Noiseless Z -> M -> Y plus Z -> Y, and an unrelated root X.
    fn chain(a: f64) -> FittedSem {
        let graph = CausalGraph::new(
            vec![
                NodeSpec::new("z", Role::Target, NodeKind::Continuous),
                NodeSpec::feature("m"),
                NodeSpec::feature("x"),
                NodeSpec::new("y", Role::Outcome, NodeKind::Binary),
            ],
            vec![
                ("z".into(), "m".into()),
                ("m".into(), "y".into()),
                ("z".into(), "y".into()),
                ("x".into(), "y".into()),
            ],
        )
        .unwrap();
        FittedSem::new(
            graph,
            vec![
                StructuralEquation::linear("z", &[], 0.0, 1.0),
                StructuralEquation::linear("x", &[], 0.0, 1.0),
                StructuralEquation::linear("m", &[("z", a)], 0.5, 0.0),
            ],
        )
        .unwrap()
    }

    fn reference(sem: &FittedSem, n: usize) -> Dataset {
        sample_synthetic(sem, n, 11).unwrap()
    }

    fn config<'a>(sem: &'a FittedSem, model: &'a LinearModel, data: &'a Dataset) -> FuzzConfig<'a> {
        let mut c = FuzzConfig::new(sem, model, data, 10_000);
        c.score_kind = ScoreKind::Raw;
        c.contrast = ContrastPolicy::fixed_delta(0.5);
        c
    }

    #[test]
    fn contrast_policy_text() {
        for text in ["flip", "marginal", "delta:0.5", "delta:-2x3", "marginalx4"] {
            let p: ContrastPolicy = text.parse().unwrap();
            assert_eq!(p.to_string(), text);
        }
        assert!("delta:".parse::<ContrastPolicy>().is_err());
        assert!("sideways".parse::<ContrastPolicy>().is_err());
    }

    #[test]
    fn model_blind_to_descendants_gives_exact_zero() {
        let sem = chain(2.0);
        let data = reference(&sem, 200);
        let model = LinearModel::manual(&["z", "m", "x"], &[0.0, 0.0, 1.5], 0.2).unwrap();
        let c = config(&sem, &model, &data);
        let meter = QueryMeter::unlimited();
        let e = estimate_total_effect(&c, 100, &meter).unwrap();
        assert_eq!(e.mean_abs_change, 0.0);
        assert_eq!(e.status, EstimateStatus::Complete);
    }

    #[test]
    fn mediated_path_matches_closed_form() {
        let (a, w, delta) = (2.0, 0.7, 0.5);
        let sem = chain(a);
        let data = reference(&sem, 300);
        let model = LinearModel::manual(&["z", "m", "x"], &[-1.3, w, 0.4], 0.0).unwrap();
        let c = config(&sem, &model, &data);
        let path = CausalPath(vec!["z".into(), "m".into(), "y".into()]);
        let e = estimate_path_effect(&c, &[path], 50, &QueryMeter::unlimited()).unwrap();
        assert!((e.mean_abs_change - (delta * a * w).abs()).abs() < 1e-9, "{e:?}");
        assert!(e.std_error < 1e-9);
    }

    #[test]
    fn direct_effect_cases() {
        let sem = chain(2.0);
        let data = reference(&sem, 300);
        let meter = QueryMeter::unlimited();

        let unlearned = LinearModel::manual(&["m", "x"], &[1.0, 1.0], 0.0).unwrap();
        let c = config(&sem, &unlearned, &data);
        let d = estimate_direct_effect(&c, 100, &meter).unwrap();
        assert_eq!(d.status, EstimateStatus::StructuralZero);
        assert_eq!((d.mean_abs_change, d.queries_used), (0.0, 0));
        assert_eq!(meter.used(), 0);

        let reads_z = LinearModel::manual(&["z", "m", "x"], &[-0.8, 0.0, 0.0], 0.0).unwrap();
        let c = config(&sem, &reads_z, &data);
        let d = estimate_direct_effect(&c, 100, &meter).unwrap();
        assert!((d.mean_abs_change - 0.4).abs() < 1e-9);

        let reads_m = LinearModel::manual(&["z", "m", "x"], &[0.0, 1.0, 0.0], 0.0).unwrap();
        let c = config(&sem, &reads_m, &data);
        assert_eq!(estimate_direct_effect(&c, 100, &meter).unwrap().mean_abs_change, 0.0);
        assert!(estimate_total_effect(&c, 100, &meter).unwrap().mean_abs_change > 0.5);
    }

    #[test]
    fn zero_delta_rejected() {
        let sem = chain(1.0);
        let data = reference(&sem, 50);
        let model = LinearModel::manual(&["m"], &[1.0], 0.0).unwrap();
        let mut c = config(&sem, &model, &data);
        c.contrast = ContrastPolicy::fixed_delta(0.0);
        assert!(matches!(
            estimate_total_effect(&c, 10, &QueryMeter::unlimited()),
            Err(FuzzError::ZeroDelta)
        ));
        c.contrast = ContrastPolicy::new(ContrastMode::Flip);
        assert!(matches!(
            estimate_total_effect(&c, 10, &QueryMeter::unlimited()),
            Err(FuzzError::FlipNeedsBinary(_))
        ));
    }

    #[test]
    fn queries_are_metered_with_caching() {
        let sem = chain(1.0);
        let data = reference(&sem, 10);
        let model = LinearModel::manual(&["m"], &[1.0], 0.0).unwrap();
        let c = config(&sem, &model, &data);
        let meter = QueryMeter::new(1000);
        let e = estimate_total_effect(&c, 200, &meter).unwrap();
        assert_eq!(e.queries_used, 400);
        // 200 counterfactual scores plus at most one original per distinct row
        assert!(meter.used() <= 210 && meter.used() > 200, "{}", meter.used());
    }

    #[test]
    fn exhaustion_truncates() {
        let sem = chain(1.0);
        let data = reference(&sem, 500);
        let model = LinearModel::manual(&["m"], &[1.0], 0.0).unwrap();
        let c = config(&sem, &model, &data);
        let meter = QueryMeter::new(101);
        let e = estimate_total_effect(&c, 200, &meter).unwrap();
        assert_eq!(e.status, EstimateStatus::Truncated);
        assert!(e.n_pairs < 200 && e.n_pairs > 0);
        assert!(meter.used() <= 101);
        let again = estimate_total_effect(&c, 200, &meter).unwrap();
        assert_eq!((again.n_pairs, again.status), (0, EstimateStatus::Truncated));
    }

    #[test]
    fn subgroup_rules() {
        let sem = chain(1.0);
        let data = reference(&sem, 400);
        let model = LinearModel::manual(&["z", "m"], &[0.3, 1.0], 0.0).unwrap();
        let mut c = config(&sem, &model, &data);
        c.contrast = ContrastPolicy::new(ContrastMode::MarginalResample);
        let meter = QueryMeter::unlimited();
        let everyone: Subgroup = "x>-1000".parse().unwrap();
        let sub = estimate_subgroup_effects(&c, &everyone, 60, &meter).unwrap();
        let global = estimate_total_effect(&c, 60, &meter).unwrap();
        assert_eq!(sub[0].path_label, TOTAL_LABEL);
        assert_eq!(sub[0].subgroup_label.as_deref(), Some("x>-1000"));
        assert_eq!(sub[0].mean_abs_change, global.mean_abs_change);
        assert_eq!(sub[0].ci95, global.ci95);

        let x = data.column("x").unwrap();
        let mut sorted = x.clone();
        sorted.sort_by(f64::total_cmp);
        let five: Subgroup = Subgroup::new("x", CmpOp::Lt, (sorted[4] + sorted[5]) / 2.0);
        assert!(matches!(
            estimate_subgroup_effects(&c, &five, 60, &meter),
            Err(FuzzError::SubgroupTooSmall { rows: 5, .. })
        ));
    }

    #[test]
    fn estimates_are_deterministic_and_seed_sensitive() {
        let sem = chain(1.0);
        let data = reference(&sem, 400);
        let model = LinearModel::manual(&["z", "m"], &[0.3, 1.0], 0.0).unwrap();
        let mut c = config(&sem, &model, &data);
        c.contrast = ContrastPolicy::new(ContrastMode::MarginalResample);
        let meter = QueryMeter::unlimited();
        let a = estimate_total_effect(&c, 300, &meter).unwrap();
        let b = estimate_total_effect(&c, 300, &meter).unwrap();
        assert_eq!(a, b);
        c.seed = 1;
        assert_ne!(estimate_total_effect(&c, 300, &meter).unwrap().mean_abs_change, a.mean_abs_change);
    }

    #[test]
    fn ci_width_shrinks_with_pairs() {
        let sem = chain(1.0);
        let data = reference(&sem, 5000);
        let model = LinearModel::manual(&["z", "m"], &[0.3, 1.0], 0.0).unwrap();
        let mut c = config(&sem, &model, &data);
        c.contrast = ContrastPolicy::new(ContrastMode::MarginalResample);
        let meter = QueryMeter::unlimited();
        let width = |n: usize| {
            let e = estimate_total_effect(&c, n, &meter).unwrap();
            e.ci95.1 - e.ci95.0
        };
        let (w1, w2, w3) = (width(100), width(400), width(1600));
        for (wide, narrow) in [(w1, w2), (w2, w3)] {
            let ratio = wide / narrow;
            assert!((1.0..=4.0).contains(&ratio), "{ratio}");
        }
    }

    #[test]
    fn run_without_any_path_reports_no_path() {
        let graph = CausalGraph::new(
            vec![
                NodeSpec::new("z", Role::Target, NodeKind::Continuous),
                NodeSpec::feature("x"),
                NodeSpec::new("y", Role::Outcome, NodeKind::Binary),
            ],
            vec![("x".into(), "y".into())],
        )
        .unwrap();
        let sem = FittedSem::new(
            graph,
            vec![
                StructuralEquation::linear("z", &[], 0.0, 1.0),
                StructuralEquation::linear("x", &[], 0.0, 1.0),
            ],
        )
        .unwrap();
        let data = sample_synthetic(&sem, 100, 1).unwrap();
        let model = LinearModel::manual(&["x"], &[1.0], 0.0).unwrap();
        let c = FuzzConfig::new(&sem, &model, &data, 1000);
        let r = run_causal_fuzz(&c).unwrap();
        assert_eq!(r.overall.status, RunStatus::NoPath);
        assert_eq!(r.overall.verdict, Verdict::Pass);
        assert!(r.entries.is_empty());
    }

    #[test]
    fn small_budget_fails_before_querying() {
        let sem = chain(1.0);
        let data = reference(&sem, 100);
        let model = LinearModel::manual(&["z", "m"], &[0.3, 1.0], 0.0).unwrap();
        let mut c = config(&sem, &model, &data);
        c.budget = 60;
        let meter = QueryMeter::new(60);
        let err = run_causal_fuzz_with_meter(&c, &meter).unwrap_err();
        assert!(matches!(err, FuzzError::BudgetTooSmall { .. }), "{err}");
        assert!(err.is_config());
        assert_eq!(meter.used(), 0);
    }

    #[test]
    fn run_reports_every_estimand() {
        let sem = chain(1.0);
        let data = reference(&sem, 500);
        let model = LinearModel::manual(&["z", "m", "x"], &[0.3, 1.0, 0.1], 0.0).unwrap();
        let c = config(&sem, &model, &data);
        let r = run_causal_fuzz(&c).unwrap();
        let mut paths: Vec<&str> = r.entries.iter().map(|e| e.path.as_str()).collect();
        paths.sort();
        assert_eq!(paths, ["DIRECT", "TOTAL", "z→m→y"]);
        assert!(r.header.budget_used <= r.header.budget);
        assert_eq!(r.overall.verdict, Verdict::Leak);
        assert_eq!(r.overall.flagged_mediators, ["m"]);
    }

    #[test]
    fn data_column_order_does_not_matter() {
        let sem = chain(2.0);
        let data = reference(&sem, 100);
        let names = data.names();
        let mut reversed: Vec<&str> = names.clone();
        reversed.reverse();
        let shuffled = data.select_columns(&reversed).unwrap();
        let model = LinearModel::manual(&["m", "z"], &[1.0, 0.5], 0.0).unwrap();
        let a = estimate_total_effect(&config(&sem, &model, &data), 80, &QueryMeter::unlimited()).unwrap();
        let b = estimate_total_effect(&config(&sem, &model, &shuffled), 80, &QueryMeter::unlimited()).unwrap();
        assert_eq!(a, b);
    }
}
