use std::net::ToSocketAddrs;
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use tiny_http::{Header, Method, Request, Response, Server};

use super::remote::{ErrorResponse, PredictRequest, PredictResponse, SchemaResponse, MAX_WIRE_BATCH};
use super::{PredictError, Predictor, ScoreKind};

/// Serves a predictor over the JSON wire protocol on a background thread.
pub struct PredictionServer {
    http: Arc<Server>,
    worker: Option<JoinHandle<()>>,
    url: String,
}

impl PredictionServer {
    /// Binds `addr` (port 0 picks a free port) and starts serving.
    pub fn spawn(model: Arc<dyn Predictor>, addr: impl ToSocketAddrs) -> std::io::Result<Self> {
        let http = Server::http(addr).map_err(std::io::Error::other)?;
        let local = http
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("not an IP listener"))?;
        let http = Arc::new(http);
        let worker = {
            let http = Arc::clone(&http);
            thread::spawn(move || {
                for request in http.incoming_requests() {
                    handle(model.as_ref(), request);
                }
            })
        };
        Ok(Self {
            http,
            worker: Some(worker),
            url: format!("http://{local}"),
        })
    }

    pub fn url(&self) -> String {
        self.url.clone()
    }

    /// Blocks until the server thread exits.
    pub fn join(mut self) {
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.http.unblock();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

impl Drop for PredictionServer {
    fn drop(&mut self) {
        self.stop();
    }
}

fn handle(model: &dyn Predictor, mut request: Request) {
    let (status, body) = match (request.method(), request.url()) {
        (Method::Get, "/schema") => (
            200,
            serde_json::to_string(&SchemaResponse {
                schema: model.schema().to_vec(),
                kinds: vec![ScoreKind::Probability, ScoreKind::Raw],
            })
            .expect("schema serializes"),
        ),
        (Method::Post, "/predict") => {
            let mut text = String::new();
            match request.as_reader().read_to_string(&mut text) {
                Ok(_) => predict_body(model, &text),
                Err(e) => error(400, format!("unreadable body: {e}")),
            }
        }
        _ => error(404, "not found".into()),
    };
    let header = Header::from_bytes("Content-Type", "application/json").expect("static header");
    let _ = request.respond(Response::from_string(body).with_status_code(status).with_header(header));
}

fn predict_body(model: &dyn Predictor, text: &str) -> (u16, String) {
    let req: PredictRequest = match serde_json::from_str(text) {
        Ok(r) => r,
        Err(e) => return error(400, format!("malformed request: {e}")),
    };
    if req.schema != model.schema() {
        return error(
            400,
            format!("schema mismatch: expected {:?}, found {:?}", model.schema(), req.schema),
        );
    }
    if req.rows.len() > MAX_WIRE_BATCH {
        return error(400, format!("batch of {} exceeds {MAX_WIRE_BATCH} rows", req.rows.len()));
    }
    if let Some((i, row)) = req.rows.iter().enumerate().find(|(_, r)| r.len() != req.schema.len()) {
        return error(400, format!("row {i} has {} values, schema has {}", row.len(), req.schema.len()));
    }
    match model.score(&req.rows, req.kind) {
        Ok(scores) => (
            200,
            serde_json::to_string(&PredictResponse { scores }).expect("scores serialize"),
        ),
        Err(e @ PredictError::UnsupportedKind(_)) => error(400, e.to_string()),
        Err(e) => error(500, e.to_string()),
    }
}

fn error(status: u16, message: String) -> (u16, String) {
    let body = serde_json::to_string(&ErrorResponse { error: message }).expect("error serializes");
    (status, body)
}
