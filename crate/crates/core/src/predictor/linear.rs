use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{PredictError, Predictor, ScoreKind};
use crate::data::Dataset;
use crate::logistic::{self, GdOptions};
use crate::scalar::Scalar;
use crate::scm::GatedTerm;

const MIN_TRAINING_ROWS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyper {
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            iterations: 2000,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("column `{0}` not found")]
    MissingColumn(String),
    #[error("need at least {MIN_TRAINING_ROWS} rows, got {0}")]
    TooFewRows(usize),
    #[error("outcome `{0}` must be binary")]
    NonBinaryOutcome(String),
    #[error("outcome `{0}` has a single class")]
    DegenerateOutcome(String),
    #[error("non-finite value in column `{0}`")]
    NonFinite(String),
    #[error("feature list must not contain the outcome `{0}`")]
    OutcomeAsFeature(String),
    #[error("gated term references `{0}`, which is not a feature")]
    BadTerm(String),
}

/// Logistic-link linear scorer.
///
/// `raw = intercept + weights . x + sum of gated terms`, `probability =
/// logistic(raw)`. Trained models record `hyper` and `seed`; manual models
/// (frozen user-supplied coefficients) leave them empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearModel {
    pub schema: Vec<String>,
    pub weights: Vec<f64>,
    pub intercept: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gated: Vec<GatedTerm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyper: Option<Hyper>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip)]
    gated_index: Vec<(usize, usize)>,
}

impl LinearModel {
    pub fn manual(schema: &[&str], weights: &[f64], intercept: f64) -> Result<Self, PredictError> {
        Self {
            schema: schema.iter().map(|s| s.to_string()).collect(),
            weights: weights.to_vec(),
            intercept,
            gated: Vec::new(),
            hyper: None,
            seed: None,
            gated_index: Vec::new(),
        }
        .validated()
    }

    pub fn with_gated(mut self, term: GatedTerm) -> Result<Self, PredictError> {
        self.gated.push(term);
        self.validated()
    }

    fn validated(mut self) -> Result<Self, PredictError> {
        if self.weights.len() != self.schema.len() {
            return Err(PredictError::ModelFile(format!(
                "{} weights for {} schema columns",
                self.weights.len(),
                self.schema.len()
            )));
        }
        if !self.intercept.is_finite() || self.weights.iter().any(|w| !w.is_finite()) {
            return Err(PredictError::ModelFile("non-finite coefficient".into()));
        }
        let position = |name: &str| {
            self.schema
                .iter()
                .position(|s| s == name)
                .ok_or_else(|| PredictError::ModelFile(format!("gated term references unknown column `{name}`")))
        };
        self.gated_index = self
            .gated
            .iter()
            .map(|g| Ok((position(&g.feature)?, position(&g.gate)?)))
            .collect::<Result<_, PredictError>>()?;
        Ok(self)
    }

    pub fn raw(&self, row: &[f64]) -> f64 {
        let linear = row
            .iter()
            .zip(&self.weights)
            .fold(self.intercept, |acc, (&x, &w)| acc + w * x);
        self.gated
            .iter()
            .zip(&self.gated_index)
            .fold(linear, |acc, (g, &(f, gate))| acc + g.contribution(row[f], row[gate]))
    }

    pub fn probability(&self, row: &[f64]) -> f64 {
        self.raw(row).logistic()
    }

    pub fn weight(&self, feature: &str) -> Option<f64> {
        self.schema
            .iter()
            .position(|s| s == feature)
            .map(|i| self.weights[i])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, PredictError> {
        let model: Self = serde_json::from_str(text).map_err(|e| PredictError::ModelFile(e.to_string()))?;
        model.validated()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PredictError> {
        let text = std::fs::read_to_string(path).map_err(|e| PredictError::ModelFile(e.to_string()))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }
}

impl Predictor for LinearModel {
    fn schema(&self) -> &[String] {
        &self.schema
    }

    fn model_id(&self) -> String {
        let compact = serde_json::to_vec(self).expect("model serializes");
        let digest = Sha256::digest(&compact);
        let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
        format!("linear:{hex}")
    }

    fn score(&self, rows: &[Vec<f64>], kind: ScoreKind) -> Result<Vec<f64>, PredictError> {
        Ok(rows
            .iter()
            .map(|r| match kind {
                ScoreKind::Raw => self.raw(r),
                ScoreKind::Probability => self.probability(r),
            })
            .collect())
    }
}

/// Trains a logistic regression of `outcome` on `features`.
pub fn train_builtin(
    data: &Dataset,
    outcome: &str,
    features: &[&str],
    hyper: Hyper,
    seed: u64,
) -> Result<LinearModel, TrainError> {
    train_builtin_with_terms(data, outcome, features, &[], hyper, seed)
}

/// As [`train_builtin`], additionally learning weights for declared gated
/// interaction terms (the `weight` field of each term is ignored on input).
pub fn train_builtin_with_terms(
    data: &Dataset,
    outcome: &str,
    features: &[&str],
    terms: &[GatedTerm],
    hyper: Hyper,
    seed: u64,
) -> Result<LinearModel, TrainError> {
    if data.n_rows() < MIN_TRAINING_ROWS {
        return Err(TrainError::TooFewRows(data.n_rows()));
    }
    if features.contains(&outcome) {
        return Err(TrainError::OutcomeAsFeature(outcome.to_string()));
    }
    let column = |name: &str| {
        let col = data
            .column(name)
            .ok_or_else(|| TrainError::MissingColumn(name.to_string()))?;
        if col.iter().any(|v| !v.is_finite()) {
            return Err(TrainError::NonFinite(name.to_string()));
        }
        Ok(col)
    };
    let y = column(outcome)?;
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(TrainError::NonBinaryOutcome(outcome.to_string()));
    }
    let positives = y.iter().filter(|&&v| v == 1.0).count();
    if positives == 0 || positives == y.len() {
        return Err(TrainError::DegenerateOutcome(outcome.to_string()));
    }
    let mut xs: Vec<Vec<f64>> = features.iter().map(|f| column(f)).collect::<Result<_, _>>()?;
    for t in terms {
        let f = features
            .iter()
            .position(|&n| n == t.feature)
            .ok_or_else(|| TrainError::BadTerm(t.feature.clone()))?;
        let g = features
            .iter()
            .position(|&n| n == t.gate)
            .ok_or_else(|| TrainError::BadTerm(t.gate.clone()))?;
        let basis = xs[f]
            .iter()
            .zip(&xs[g])
            .map(|(&x, &gate)| if gate < t.below { x } else { 0.0 })
            .collect();
        xs.push(basis);
    }

    let fit = logistic::fit(
        &xs,
        &y,
        GdOptions {
            step: Some(hyper.learning_rate),
            max_iter: hyper.iterations,
            tol: 1e-10,
            l2: hyper.l2,
        },
    );
    let p = features.len();
    let gated = terms
        .iter()
        .zip(&fit.weights[p..])
        .map(|(t, &w)| GatedTerm { weight: w, ..t.clone() })
        .collect();
    let model = LinearModel {
        schema: features.iter().map(|s| s.to_string()).collect(),
        weights: fit.weights[..p].to_vec(),
        intercept: fit.intercept,
        gated,
        hyper: Some(hyper),
        seed: Some(seed),
        gated_index: Vec::new(),
    };
    Ok(model.validated().expect("trained coefficients are consistent"))
}
