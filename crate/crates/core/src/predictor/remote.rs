use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{PredictError, Predictor, ScoreKind};

/// Maximum rows carried by one wire request; larger batches are split.
pub const MAX_WIRE_BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Extra attempts after the first failure.
    pub retries: u32,
    /// Delay before the first retry; doubled on each subsequent one.
    pub initial_backoff: Duration,
    pub timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            retries: 2,
            initial_backoff: Duration::from_millis(100),
            timeout: Duration::from_secs(30),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct PredictRequest {
    pub schema: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub kind: ScoreKind,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct PredictResponse {
    pub scores: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct SchemaResponse {
    pub schema: Vec<String>,
    pub kinds: Vec<ScoreKind>,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct ErrorResponse {
    pub error: String,
}

/// Client for a model served over the JSON wire protocol.
#[derive(Debug)]
pub struct RemotePredictor {
    base: String,
    schema: Vec<String>,
    kinds: Vec<ScoreKind>,
    agent: ureq::Agent,
    policy: RetryPolicy,
    retries: AtomicUsize,
}

/// Handshakes with `url` and checks that the served schema equals `schema`
/// in order.
pub fn connect_remote(url: &str, schema: &[String], policy: RetryPolicy) -> Result<RemotePredictor, PredictError> {
    handshake(url, Some(schema), policy)
}

/// Handshakes with `url` and adopts whatever schema it serves.
pub fn discover_remote(url: &str, policy: RetryPolicy) -> Result<RemotePredictor, PredictError> {
    handshake(url, None, policy)
}

fn handshake(url: &str, expected: Option<&[String]>, policy: RetryPolicy) -> Result<RemotePredictor, PredictError> {
    let base = url.trim_end_matches('/').to_string();
    let agent = ureq::AgentBuilder::new().timeout(policy.timeout).build();
    let client = RemotePredictor {
        base,
        schema: Vec::new(),
        kinds: Vec::new(),
        agent,
        policy,
        retries: AtomicUsize::new(0),
    };
    let served: SchemaResponse = client.with_retry(|| {
        let resp = client.agent.get(&format!("{}/schema", client.base)).call();
        read_json(resp)
    })?;
    if let Some(schema) = expected.filter(|s| *s != served.schema.as_slice()) {
        return Err(PredictError::SchemaMismatch {
            expected: schema.to_vec(),
            found: served.schema,
        });
    }
    Ok(RemotePredictor {
        schema: served.schema,
        kinds: served.kinds,
        ..client
    })
}

impl RemotePredictor {
    pub fn url(&self) -> &str {
        &self.base
    }

    /// Retries performed so far across all calls.
    pub fn retry_count(&self) -> usize {
        self.retries.load(Ordering::SeqCst)
    }

    fn with_retry<R>(&self, mut call: impl FnMut() -> Result<R, Attempt>) -> Result<R, PredictError> {
        let mut backoff = self.policy.initial_backoff;
        let mut attempt = 0;
        loop {
            match call() {
                Ok(value) => return Ok(value),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retryable(e)) => {
                    if attempt >= self.policy.retries {
                        return Err(e);
                    }
                    attempt += 1;
                    self.retries.fetch_add(1, Ordering::SeqCst);
                    thread::sleep(backoff);
                    backoff *= 2;
                }
            }
        }
    }

    fn score_chunk(&self, rows: &[Vec<f64>], kind: ScoreKind) -> Result<Vec<f64>, PredictError> {
        let body = PredictRequest {
            schema: self.schema.clone(),
            rows: rows.to_vec(),
            kind,
        };
        let response: PredictResponse = self.with_retry(|| {
            let resp = self
                .agent
                .post(&format!("{}/predict", self.base))
                .send_json(&body);
            read_json(resp)
        })?;
        if response.scores.len() != rows.len() {
            return Err(PredictError::Malformed(format!(
                "{} scores for {} rows",
                response.scores.len(),
                rows.len()
            )));
        }
        if response.scores.iter().any(|s| !s.is_finite()) {
            return Err(PredictError::Malformed("non-finite score".into()));
        }
        Ok(response.scores)
    }
}

enum Attempt {
    Retryable(PredictError),
    Fatal(PredictError),
}

fn read_json<R: serde::de::DeserializeOwned>(resp: Result<ureq::Response, ureq::Error>) -> Result<R, Attempt> {
    match resp {
        Ok(r) => r
            .into_json::<R>()
            .map_err(|e| Attempt::Fatal(PredictError::Malformed(e.to_string()))),
        Err(ureq::Error::Status(status, r)) => {
            let message = r
                .into_json::<ErrorResponse>()
                .map(|e| e.error)
                .unwrap_or_else(|_| "no error body".to_string());
            let err = PredictError::Rejected { status, message };
            if status >= 500 {
                Err(Attempt::Retryable(err))
            } else {
                Err(Attempt::Fatal(err))
            }
        }
        Err(ureq::Error::Transport(t)) => {
            let message = t.to_string();
            if message.contains("timed out") {
                Err(Attempt::Retryable(PredictError::Timeout(message)))
            } else {
                Err(Attempt::Retryable(PredictError::Transport(message)))
            }
        }
    }
}

impl Predictor for RemotePredictor {
    fn schema(&self) -> &[String] {
        &self.schema
    }

    fn model_id(&self) -> String {
        format!("remote:{}", self.base)
    }

    fn score(&self, rows: &[Vec<f64>], kind: ScoreKind) -> Result<Vec<f64>, PredictError> {
        if !self.kinds.is_empty() && !self.kinds.contains(&kind) {
            return Err(PredictError::UnsupportedKind(kind));
        }
        let mut scores = Vec::with_capacity(rows.len());
        for chunk in rows.chunks(MAX_WIRE_BATCH) {
            scores.extend(self.score_chunk(chunk, kind)?);
        }
        Ok(scores)
    }
}
