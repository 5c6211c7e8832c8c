//! The defended prediction service.
//!
//! `POST /v1/predict` answers every row with f_θ(g(x)); `GET /v1/info`
//! reports only K and the link. Garbling parameters never appear in any
//! response.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use tokio::sync::oneshot;

use endogarble::rng::{self, StreamRng};
use endogarble::{garbled_predict, GarblingConfig, RegressionModel};

use crate::config::ServiceConfig;
use crate::error::ServiceError;
use crate::wire::{encode_response, ErrorBody, InfoResponse, PredictRequest};

const BODY_LIMIT: usize = 512 * 1024 * 1024;

struct AppState {
    model: RegressionModel,
    garbling: GarblingConfig,
    max_batch: usize,
    rng: Mutex<StreamRng>,
}

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn error_response(status: StatusCode, message: String) -> Response {
    let body = serde_json::to_string(&ErrorBody { error: message }).expect("serializable");
    json_response(status, body)
}

async fn info(State(state): State<Arc<AppState>>) -> Response {
    let body = InfoResponse {
        k: state.model.k(),
        link: state.model.link.as_str().to_string(),
    };
    json_response(StatusCode::OK, serde_json::to_string(&body).expect("serializable"))
}

async fn predict(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    // Parser messages can quote the request back; keep only the position.
    let request: PredictRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => {
            return error_response(
                StatusCode::BAD_REQUEST,
                format!(
                    "malformed request at line {} column {}: expected {{\"inputs\": [[number, ...], ...]}}",
                    e.line(),
                    e.column()
                ),
            )
        }
    };
    if request.inputs.len() > state.max_batch {
        return error_response(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!(
                "batch of {} rows exceeds the limit of {} rows",
                request.inputs.len(),
                state.max_batch
            ),
        );
    }
    let k = state.model.k();
    if let Some((i, row)) = request.inputs.iter().enumerate().find(|(_, r)| r.len() != k) {
        return error_response(
            StatusCode::BAD_REQUEST,
            format!("row {i} has {} values, expected K = {k}", row.len()),
        );
    }

    let outputs: Result<Vec<f64>, _> = {
        let mut rng = state.rng.lock().unwrap_or_else(|p| p.into_inner());
        request
            .inputs
            .iter()
            .map(|row| garbled_predict(&state.model, row, &state.garbling, &mut *rng))
            .collect()
    };
    match outputs {
        Ok(outputs) => json_response(StatusCode::OK, encode_response(&outputs)),
        Err(_) => error_response(StatusCode::BAD_REQUEST, "prediction failed for this batch".to_string()),
    }
}

/// Axum router for a service config. Each router owns its RNG stream,
/// seeded from `config.seed`.
pub fn router(config: &ServiceConfig) -> Result<Router, ServiceError> {
    config.validate()?;
    let state = Arc::new(AppState {
        model: config.model.clone(),
        garbling: config.garbling.clone(),
        max_batch: config.max_batch,
        rng: Mutex::new(rng::seeded(config.seed)),
    });
    Ok(Router::new()
        .route("/v1/predict", post(predict))
        .route("/v1/info", get(info))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state))
}

/// A service running on a background thread. Dropping the handle stops it.
pub struct ServiceHandle {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<Result<(), ServiceError>>>,
}

impl ServiceHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Base URL, e.g. `http://127.0.0.1:8080`.
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops the service and waits for it to exit.
    pub fn shutdown(mut self) -> Result<(), ServiceError> {
        self.stop()
    }

    /// Blocks until the service exits on its own.
    pub fn wait(mut self) -> Result<(), ServiceError> {
        match self.thread.take() {
            Some(t) => t
                .join()
                .unwrap_or_else(|_| Err(ServiceError::Config("service thread panicked".into()))),
            None => Ok(()),
        }
    }

    fn stop(&mut self) -> Result<(), ServiceError> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t
                .join()
                .unwrap_or_else(|_| Err(ServiceError::Config("service thread panicked".into()))),
            None => Ok(()),
        }
    }
}

impl Drop for ServiceHandle {
    fn drop(&mut self) {
        let _ = self.stop();
    }
}

/// Binds `config.bind_address` and serves on a background runtime.
/// Returns once the socket is listening.
pub fn serve(config: &ServiceConfig) -> Result<ServiceHandle, ServiceError> {
    let app = router(config)?;
    let addr = config.socket_addr()?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_io()
        .build()?;
    let listener = runtime.block_on(tokio::net::TcpListener::bind(addr))?;
    let local = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let thread = std::thread::Builder::new()
        .name("endogarble-service".to_string())
        .spawn(move || {
            runtime.block_on(async move {
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await
            })?;
            Ok(())
        })?;
    Ok(ServiceHandle {
        addr: local,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}
