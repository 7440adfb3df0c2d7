//! Feature-removal unlearning: retrain without the target column.

use thiserror::Error;

use crate::data::Dataset;
use crate::predictor::{train_builtin, Hyper, LinearModel, TrainError};

#[derive(Debug, Error)]
pub enum UnlearnError {
    #[error("target column `{0}` not found")]
    MissingTarget(String),
    #[error("target `{0}` is the outcome")]
    TargetIsOutcome(String),
    #[error(transparent)]
    Train(#[from] TrainError),
}

/// Trains the builtin model on every column except `target` and `outcome`.
/// The returned schema never contains `target`.
pub fn unlearn_feature_removal(
    data: &Dataset,
    target: &str,
    outcome: &str,
    hyper: Hyper,
    seed: u64,
) -> Result<LinearModel, UnlearnError> {
    if target == outcome {
        return Err(UnlearnError::TargetIsOutcome(target.to_string()));
    }
    if data.column_index(target).is_none() {
        return Err(UnlearnError::MissingTarget(target.to_string()));
    }
    let features: Vec<&str> = data
        .names()
        .into_iter()
        .filter(|&n| n != target && n != outcome)
        .collect();
    Ok(train_builtin(data, outcome, &features, hyper, seed)?)
}
