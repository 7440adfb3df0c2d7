//! Black-box scoring with metered query budgets.

mod linear;
mod remote;
mod server;

use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::linear::{train_builtin, train_builtin_with_terms, Hyper, LinearModel, TrainError};
pub use self::remote::{connect_remote, discover_remote, RemotePredictor, RetryPolicy, MAX_WIRE_BATCH};
pub use self::server::PredictionServer;

/// Environment variable consulted for a default remote model URL.
pub const MODEL_URL_ENV: &str = "CAUSALFUZZ_MODEL_URL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    /// Class probability in [0, 1].
    #[default]
    Probability,
    /// Pre-link score in R.
    Raw,
}

impl ScoreKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreKind::Probability => "probability",
            ScoreKind::Raw => "raw",
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoreKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "probability" => Ok(ScoreKind::Probability),
            "raw" => Ok(ScoreKind::Raw),
            other => Err(format!("unknown score kind `{other}` (expected probability|raw)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("query budget exhausted: {requested} requested, {remaining} remaining")]
    BudgetExhausted { requested: usize, remaining: usize },
    #[error("schema mismatch: expected {expected:?}, found {found:?}")]
    SchemaMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("row {row} has {found} values, schema has {expected}")]
    RowWidth {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("score kind `{0}` not supported by this model")]
    UnsupportedKind(ScoreKind),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("server rejected request ({status}): {message}")]
    Rejected { status: u16, message: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("model file: {0}")]
    ModelFile(String),
}

/// Black-box scoring interface. Implementations read rows laid out in
/// `schema()` order and return one score per row.
pub trait Predictor: Send + Sync {
    fn schema(&self) -> &[String];

    /// Stable identifier recorded in report headers.
    fn model_id(&self) -> String;

    fn score(&self, rows: &[Vec<f64>], kind: ScoreKind) -> Result<Vec<f64>, PredictError>;
}

#[derive(Debug, Default)]
struct MeterState {
    used: usize,
    reserved: usize,
}

/// Synchronized query counter. `used` only grows, and only by the sizes of
/// successful calls; an attempt that would exceed the budget fails without
/// charging anything.
#[derive(Debug)]
pub struct QueryMeter {
    budget: usize,
    state: Mutex<MeterState>,
}

impl QueryMeter {
    pub fn new(budget: usize) -> Self {
        Self {
            budget,
            state: Mutex::new(MeterState::default()),
        }
    }

    pub fn unlimited() -> Self {
        Self::new(usize::MAX)
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn used(&self) -> usize {
        self.state.lock().expect("meter lock").used
    }

    /// Queries not yet used or reserved by an in-flight call.
    pub fn remaining(&self) -> usize {
        let s = self.state.lock().expect("meter lock");
        self.budget - s.used - s.reserved
    }

    pub fn reserve(&self, n: usize) -> Result<Reservation<'_>, PredictError> {
        let mut s = self.state.lock().expect("meter lock");
        let remaining = self.budget - s.used - s.reserved;
        if n > remaining {
            return Err(PredictError::BudgetExhausted {
                requested: n,
                remaining,
            });
        }
        s.reserved += n;
        Ok(Reservation {
            meter: self,
            n,
            committed: false,
        })
    }
}

/// Pending charge; released on drop unless committed.
pub struct Reservation<'a> {
    meter: &'a QueryMeter,
    n: usize,
    committed: bool,
}

impl Reservation<'_> {
    pub fn commit(mut self) {
        let mut s = self.meter.state.lock().expect("meter lock");
        s.reserved -= self.n;
        s.used += self.n;
        self.committed = true;
    }
}

impl Drop for Reservation<'_> {
    fn drop(&mut self) {
        if !self.committed {
            let mut s = self.meter.state.lock().expect("meter lock");
            s.reserved -= self.n;
        }
    }
}

/// Scores `rows`, charging `meter` exactly `rows.len()` queries on success.
pub fn predict(
    predictor: &dyn Predictor,
    rows: &[Vec<f64>],
    kind: ScoreKind,
    meter: &QueryMeter,
) -> Result<Vec<f64>, PredictError> {
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    let width = predictor.schema().len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != width) {
        return Err(PredictError::RowWidth {
            row: i,
            expected: width,
            found: r.len(),
        });
    }
    let reservation = meter.reserve(rows.len())?;
    let scores = predictor.score(rows, kind)?;
    if scores.len() != rows.len() {
        return Err(PredictError::Malformed(format!(
            "{} scores for {} rows",
            scores.len(),
            rows.len()
        )));
    }
    reservation.commit();
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    struct Constant(Vec<String>, f64);

    impl Predictor for Constant {
        fn schema(&self) -> &[String] {
            &self.0
        }
        fn model_id(&self) -> String {
            "constant".into()
        }
        fn score(&self, rows: &[Vec<f64>], _: ScoreKind) -> Result<Vec<f64>, PredictError> {
            Ok(vec![self.1; rows.len()])
        }
    }

    struct Failing(Vec<String>);

    impl Predictor for Failing {
        fn schema(&self) -> &[String] {
            &self.0
        }
        fn model_id(&self) -> String {
            "failing".into()
        }
        fn score(&self, _: &[Vec<f64>], _: ScoreKind) -> Result<Vec<f64>, PredictError> {
            Err(PredictError::Transport("down".into()))
        }
    }

    fn one_col() -> Vec<String> {
        vec!["x".into()]
    }

    #[test]
    fn empty_batch_is_free() {
        let meter = QueryMeter::new(3);
        let out = predict(&Constant(one_col(), 0.5), &[], ScoreKind::Probability, &meter).unwrap();
        assert!(out.is_empty());
        assert_eq!(meter.used(), 0);
    }

    #[test]
    fn over_budget_batch_fails_without_charge() {
        let meter = QueryMeter::new(10);
        let rows = vec![vec![0.0]; 11];
        let err = predict(&Constant(one_col(), 0.5), &rows, ScoreKind::Raw, &meter).unwrap_err();
        assert!(matches!(err, PredictError::BudgetExhausted { requested: 11, remaining: 10 }));
        assert_eq!(meter.used(), 0);
        predict(&Constant(one_col(), 0.5), &rows[..10], ScoreKind::Raw, &meter).unwrap();
        assert_eq!(meter.used(), 10);
        assert_eq!(meter.remaining(), 0);
    }

    #[test]
    fn failed_calls_charge_nothing() {
        let meter = QueryMeter::new(100);
        assert!(predict(&Failing(one_col()), &[vec![1.0]], ScoreKind::Raw, &meter).is_err());
        assert_eq!(meter.used(), 0);
        assert_eq!(meter.remaining(), 100);
    }

    #[test]
    fn row_width_checked() {
        let meter = QueryMeter::new(100);
        let err = predict(&Constant(one_col(), 0.5), &[vec![1.0, 2.0]], ScoreKind::Raw, &meter).unwrap_err();
        assert!(matches!(err, PredictError::RowWidth { .. }));
    }

    #[test]
    fn concurrent_charges_never_exceed_budget() {
        let meter = QueryMeter::new(1000);
        let model = Constant(one_col(), 0.1);
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| {
                    for _ in 0..50 {
                        let _ = predict(&model, &vec![vec![0.0]; 7], ScoreKind::Raw, &meter);
                    }
                });
            }
        });
        assert!(meter.used() <= 1000);
        assert_eq!(meter.used() % 7, 0);
        assert!(meter.used() > 1000 - 7);
    }

    proptest! {
        #[test]
        fn accounting_is_exact(calls in prop::collection::vec((0usize..30, any::<bool>()), 0..40), budget in 0usize..400) {
            let meter = QueryMeter::new(budget);
            let ok = Constant(one_col(), 0.0);
            let bad = Failing(one_col());
            let mut expected = 0;
            for (n, fail) in calls {
                let rows = vec![vec![0.0]; n];
                let p: &dyn Predictor = if fail { &bad } else { &ok };
                if predict(p, &rows, ScoreKind::Raw, &meter).is_ok() {
                    expected += n;
                }
                prop_assert!(meter.used() <= budget);
            }
            prop_assert_eq!(meter.used(), expected);
        }
    }
}
