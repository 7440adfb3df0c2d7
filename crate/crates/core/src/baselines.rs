//! Conventional influence checks reported next to the causal estimates.
//!
//! All of them score the model directly, outside the fuzzing query budget.

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::estimator::mix;
use crate::predictor::{PredictError, Predictor, ScoreKind};
use crate::stats;

/// Exhaustive enumeration is capped at 8! orderings.
pub const MAX_EXHAUSTIVE: usize = 8;
pub const DEFAULT_BACKGROUND: usize = 100;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("column `{0}` missing from data")]
    MissingColumn(String),
    #[error("column `{0}` must be binary")]
    NotBinary(String),
    #[error("column `{0}` has a single group or class")]
    SingleGroup(String),
    #[error("exhaustive enumeration over {0} items exceeds the cap of {MAX_EXHAUSTIVE}")]
    TooLarge(usize),
    #[error("background set is empty")]
    EmptyBackground,
    #[error("row has {found} values, schema has {expected}")]
    RowWidth { expected: usize, found: usize },
    #[error("at least one repeat or ordering is required")]
    ZeroRepeats,
    #[error(transparent)]
    Predict(#[from] PredictError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Fraction correct at probability threshold 0.5.
    Accuracy,
    /// Tie-adjusted rank statistic.
    Auc,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Auc => "auc",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "accuracy" => Ok(Metric::Accuracy),
            "auc" => Ok(Metric::Auc),
            other => Err(format!("unknown metric `{other}` (expected accuracy|auc)")),
        }
    }
}

/// How permutations or orderings are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plan {
    Seeded { repeats: usize, seed: u64 },
    /// Every permutation, in lexicographic order.
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PermutationImportance {
    pub feature: String,
    pub metric: Metric,
    pub mean_drop: f64,
    pub std: f64,
    pub repeats: usize,
    /// The feature is not in the model schema; nothing was computed.
    pub structural_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapleySummary {
    pub feature: String,
    pub mean_abs_value: f64,
    pub rows: usize,
    pub structural_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParityGap {
    pub group: String,
    pub threshold: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSummary {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutation_importance: Option<PermutationImportance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shapley: Option<ShapleySummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demographic_parity: Option<ParityGap>,
}

/// Rows of `data` laid out in `schema` order.
pub fn schema_rows(data: &Dataset, schema: &[String]) -> Result<Vec<Vec<f64>>, BaselineError> {
    let cols = schema
        .iter()
        .map(|n| data.column_index(n).ok_or_else(|| BaselineError::MissingColumn(n.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(data
        .rows()
        .iter()
        .map(|r| cols.iter().map(|&c| r[c]).collect())
        .collect())
}

fn binary_column(data: &Dataset, name: &str) -> Result<Vec<f64>, BaselineError> {
    let col = data
        .column(name)
        .ok_or_else(|| BaselineError::MissingColumn(name.to_string()))?;
    if col.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(BaselineError::NotBinary(name.to_string()));
    }
    if col.iter().all(|&v| v == col[0]) {
        return Err(BaselineError::SingleGroup(name.to_string()));
    }
    Ok(col)
}

pub fn accuracy(scores: &[f64], labels: &[f64]) -> f64 {
    let hits = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &y)| (s >= 0.5) == (y == 1.0))
        .count();
    hits as f64 / labels.len().max(1) as f64
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half (average ranks).
pub fn auc(scores: &[f64], labels: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    let n_pos = labels.iter().filter(|&&y| y == 1.0).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &y)| y == 1.0).map(|(r, _)| r).sum();
    (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg)
}

fn evaluate(metric: Metric, scores: &[f64], labels: &[f64]) -> f64 {
    match metric {
        Metric::Accuracy => accuracy(scores, labels),
        Metric::Auc => auc(scores, labels),
    }
}

/// All permutations of `0..n` in lexicographic order.
pub fn all_permutations(n: usize) -> Result<Vec<Vec<usize>>, BaselineError> {
    if n > MAX_EXHAUSTIVE {
        return Err(BaselineError::TooLarge(n));
    }
    let mut current: Vec<usize> = (0..n).collect();
    let mut out = vec![current.clone()];
    // next lexicographic permutation until the sequence is descending
    loop {
        let Some(i) = (1..n).rev().find(|&i| current[i - 1] < current[i]) else {
            return Ok(out);
        };
        let j = (i..n).rev().find(|&j| current[j] > current[i - 1]).expect("pivot successor");
        current.swap(i - 1, j);
        current[i..].reverse();
        out.push(current.clone());
    }
}

fn seeded_permutation(n: usize, seed: u64, index: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(&[seed, index as u64])));
    p
}

fn plan_permutations(plan: Plan, n: usize) -> Result<Vec<Vec<usize>>, BaselineError> {
    match plan {
        Plan::Exhaustive => all_permutations(n),
        Plan::Seeded { repeats: 0, .. } => Err(BaselineError::ZeroRepeats),
        Plan::Seeded { repeats, seed } => Ok((0..repeats).map(|j| seeded_permutation(n, seed, j)).collect()),
    }
}

/// Mean and standard deviation of the metric drop when `feature` is
/// shuffled across rows. Structural zero when the model does not read it.
pub fn permutation_importance(
    model: &dyn Predictor,
    data: &Dataset,
    outcome: &str,
    feature: &str,
    metric: Metric,
    plan: Plan,
) -> Result<PermutationImportance, BaselineError> {
    let Some(f) = model.schema().iter().position(|s| s == feature) else {
        return Ok(PermutationImportance {
            feature: feature.to_string(),
            metric,
            mean_drop: 0.0,
            std: 0.0,
            repeats: 0,
            structural_zero: true,
        });
    };
    let labels = binary_column(data, outcome)?;
    let rows = schema_rows(data, model.schema())?;
    let base = evaluate(metric, &model.score(&rows, ScoreKind::Probability)?, &labels);
    let perms = plan_permutations(plan, rows.len())?;
    let drops = perms
        .par_iter()
        .map(|perm| {
            let shuffled: Vec<Vec<f64>> = rows
                .iter()
                .zip(perm)
                .map(|(r, &src)| {
                    let mut r = r.clone();
                    r[f] = rows[src][f];
                    r
                })
                .collect();
            let scores = model.score(&shuffled, ScoreKind::Probability)?;
            Ok(base - evaluate(metric, &scores, &labels))
        })
        .collect::<Result<Vec<f64>, BaselineError>>()?;
    Ok(PermutationImportance {
        feature: feature.to_string(),
        metric,
        mean_drop: stats::mean(&drops),
        std: if drops.len() > 1 { stats::std_dev(&drops) } else { 0.0 },
        repeats: drops.len(),
        structural_zero: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyValues {
    pub features: Vec<String>,
    pub values: Vec<f64>,
    /// Monte-Carlo standard error per feature (zero when exhaustive).
    pub std_errors: Vec<f64>,
    /// Mean score over the background.
    pub base_value: f64,
    pub prediction: f64,
    pub n_orderings: usize,
}

/// Permutation-sampling Shapley values with an interventional value
/// function: absent features take each background row's values and the
/// score is averaged over the background.
pub fn shapley_mc(
    model: &dyn Predictor,
    background: &[Vec<f64>],
    row: &[f64],
    plan: Plan,
    kind: ScoreKind,
) -> Result<ShapleyValues, BaselineError> {
    let p = model.schema().len();
    if background.is_empty() {
        return Err(BaselineError::EmptyBackground);
    }
    if let Some(bad) = std::iter::once(row).chain(background.iter().map(Vec::as_slice)).find(|r| r.len() != p) {
        return Err(BaselineError::RowWidth {
            expected: p,
            found: bad.len(),
        });
    }
    let orderings = plan_permutations(plan, p)?;
    let base_value = stats::mean(&model.score(background, kind)?);
    let contributions = orderings
        .par_iter()
        .map(|order| {
            // coalitions grow one feature at a time; all p coalitions in one batch
            let mut batch = Vec::with_capacity(p * background.len());
            let mut present = vec![false; p];
            for &feature in order {
                present[feature] = true;
                for b in background {
                    batch.push((0..p).map(|j| if present[j] { row[j] } else { b[j] }).collect());
                }
            }
            let scores = model.score(&batch, kind)?;
            let mut phi = vec![0.0; p];
            let mut previous = base_value;
            for (k, &feature) in order.iter().enumerate() {
                let value = stats::mean(&scores[k * background.len()..(k + 1) * background.len()]);
                phi[feature] = value - previous;
                previous = value;
            }
            Ok(phi)
        })
        .collect::<Result<Vec<Vec<f64>>, BaselineError>>()?;
    let m = contributions.len();
    let column = |j: usize| -> Vec<f64> { contributions.iter().map(|c| c[j]).collect() };
    let values = (0..p).map(|j| stats::mean(&column(j))).collect();
    let std_errors = (0..p)
        .map(|j| match plan {
            Plan::Exhaustive => 0.0,
            Plan::Seeded { .. } if m > 1 => stats::std_error(&column(j)),
            Plan::Seeded { .. } => 0.0,
        })
        .collect();
    Ok(ShapleyValues {
        features: model.schema().to_vec(),
        values,
        std_errors,
        base_value,
        prediction: model.score(&[row.to_vec()], kind)?[0],
        n_orderings: m,
    })
}

/// `|P(score >= threshold | g = 1) - P(score >= threshold | g = 0)|`.
pub fn demographic_parity_gap(
    model: &dyn Predictor,
    data: &Dataset,
    group: &str,
    threshold: f64,
) -> Result<f64, BaselineError> {
    let groups = binary_column(data, group)?;
    let scores = model.score(&schema_rows(data, model.schema())?, ScoreKind::Probability)?;
    let rate = |g: f64| {
        let (hits, n) = scores
            .iter()
            .zip(&groups)
            .filter(|(_, &x)| x == g)
            .fold((0usize, 0usize), |(h, n), (&s, _)| (h + usize::from(s >= threshold), n + 1));
        hits as f64 / n as f64
    };
    Ok((rate(1.0) - rate(0.0)).abs())
}

/// Seeded background sample of at most `size` rows.
pub fn background_rows(rows: &[Vec<f64>], size: usize, seed: u64) -> Vec<Vec<f64>> {
    if rows.len() <= size {
        return rows.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[seed, 0x42_47]));
    let mut picked = index::sample(&mut rng, rows.len(), size).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| rows[i].clone()).collect()
}

/// Baselines for `target`: permutation importance (when `outcome` labels are
/// available), mean |Shapley value| over a few rows, and the demographic
/// parity gap when the target is binary.
pub fn summarize(
    model: &dyn Predictor,
    data: &Dataset,
    target: &str,
    outcome: Option<&str>,
    seed: u64,
) -> Result<BaselineSummary, BaselineError> {
    const REPEATS: usize = 10;
    const EXPLAINED_ROWS: usize = 20;
    const ORDERINGS: usize = 16;
    let mut summary = BaselineSummary::default();
    if let Some(y) = outcome.filter(|y| binary_column(data, y).is_ok()) {
        summary.permutation_importance = Some(permutation_importance(
            model,
            data,
            y,
            target,
            Metric::Accuracy,
            Plan::Seeded { repeats: REPEATS, seed },
        )?);
    }
    summary.shapley = Some(match model.schema().iter().position(|s| s == target) {
        None => ShapleySummary {
            feature: target.to_string(),
            mean_abs_value: 0.0,
            rows: 0,
            structural_zero: true,
        },
        Some(j) => {
            let rows = schema_rows(data, model.schema())?;
            let background = background_rows(&rows, DEFAULT_BACKGROUND, seed);
            let explained = background_rows(&rows, EXPLAINED_ROWS, seed ^ 1);
            let values = explained
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let plan = Plan::Seeded {
                        repeats: ORDERINGS,
                        seed: mix(&[seed, i as u64]),
                    };
                    Ok(shapley_mc(model, &background, r, plan, ScoreKind::Probability)?.values[j].abs())
                })
                .collect::<Result<Vec<f64>, BaselineError>>()?;
            ShapleySummary {
                feature: target.to_string(),
                mean_abs_value: stats::mean(&values),
                rows: values.len(),
                structural_zero: false,
            }
        }
    });
    if binary_column(data, target).is_ok() {
        summary.demographic_parity = Some(ParityGap {
            group: target.to_string(),
            threshold: 0.5,
            gap: demographic_parity_gap(model, data, target, 0.5)?,
        });
    }
    Ok(summary)
}
