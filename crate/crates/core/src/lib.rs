//! Causal fuzzing for residual feature influence after machine unlearning.
//!
//! A user-supplied causal graph is fitted as a linear structural model, the
//! target feature is intervened on along chosen edge sets, and a black-box
//! predictor is queried on original and counterfactual rows under a hard
//! query budget. Effects are reported per path, in total, directly, and per
//! subgroup, next to conventional importance baselines.

pub mod baselines;
pub mod data;
pub mod estimator;
pub mod graph;
pub mod linalg;
pub mod logistic;
pub mod predictor;
pub mod report;
pub mod scalar;
pub mod scm;
pub mod stats;
pub mod unlearn;

pub use data::{Dataset, EncodingTable};
pub use estimator::{EffectEstimate, FuzzConfig, FuzzError};
pub use graph::{CausalGraph, CausalPath, PathSet};
pub use predictor::{LinearModel, Predictor, QueryMeter, ScoreKind};
pub use report::{LeakageReport, Verdict};
pub use scalar::Scalar;
pub use scm::{FittedSem, Intervention, StructuralEquation};

pub type DatasetF32 = Dataset<f32>;
pub type DatasetF64 = Dataset<f64>;
pub type FittedSemF32 = FittedSem<f32>;
pub type FittedSemF64 = FittedSem<f64>;
