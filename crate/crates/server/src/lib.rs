//! HTTP front end for the simulator: launch runs, follow them live as
//! NDJSON, and fetch finished logs.

pub mod registry;

use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::time::Instant;

use ccsim::cca::{BbrTunables, BbrVersion};
use ccsim::scenario::{presets, PresetInfo};
use ccsim::{preset, CcaKind, Direction, QdiscKind, ScenarioConfig};

use registry::{CancelError, Line, Registry, RunEntry, SCHEMA_VERSION};

/// Default live-stream pace: simulated seconds per wall-clock second.
pub const DEFAULT_SPEED: f64 = 10.0;

#[derive(Clone)]
pub struct AppState {
    pub registry: Arc<Registry>,
}

pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/catalog", get(catalog))
        .route("/api/runs", get(list_runs).post(create_run))
        .route("/api/runs/{id}", get(get_run).delete(cancel_run))
        .route("/api/runs/{id}/stream", get(stream_run))
        .route("/api/runs/{id}/log", get(run_log))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

struct ApiError {
    status: StatusCode,
    message: String,
    details: Vec<String>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
            details: Vec::new(),
        }
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("no run `{id}`"))
    }
}

impl From<ccsim::Error> for ApiError {
    fn from(e: ccsim::Error) -> Self {
        let details = match &e {
            ccsim::Error::Validation(v) => v.clone(),
            _ => Vec::new(),
        };
        let status = if e.is_validation() { StatusCode::BAD_REQUEST } else { StatusCode::INTERNAL_SERVER_ERROR };
        ApiError {
            status,
            message: e.to_string(),
            details,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({
            "schema_version": SCHEMA_VERSION,
            "error": self.message,
            "details": self.details,
        });
        (self.status, Json(body)).into_response()
    }
}

#[derive(Serialize)]
struct Catalog {
    schema_version: u32,
    ccas: Vec<CcaKind>,
    aqms: Vec<QdiscKind>,
    directions: Vec<Direction>,
    presets: Vec<PresetInfo>,
    tunables: Vec<(BbrVersion, BbrTunables)>,
}

async fn catalog() -> Json<Catalog> {
    Json(Catalog {
        schema_version: SCHEMA_VERSION,
        ccas: CcaKind::ALL.to_vec(),
        aqms: QdiscKind::ALL.to_vec(),
        directions: Direction::ALL.to_vec(),
        presets: presets(),
        tunables: [BbrVersion::V1, BbrVersion::V2, BbrVersion::V3]
            .into_iter()
            .map(|v| (v, BbrTunables::for_version(v)))
            .collect(),
    })
}

async fn list_runs(State(st): State<AppState>) -> Json<Value> {
    Json(json!({ "schema_version": SCHEMA_VERSION, "runs": st.registry.list() }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PresetRequest {
    preset: String,
    #[serde(default)]
    seed: Option<u64>,
}

/// The body is either a full scenario document or `{"preset": .., "seed": ..}`.
fn parse_request(body: &Bytes) -> Result<ScenarioConfig, ApiError> {
    let value: Value = serde_json::from_slice(body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("malformed JSON: {e}")))?;
    if value.get("preset").is_some() {
        let req: PresetRequest = serde_json::from_value(value)
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("preset request: {e}")))?;
        return Ok(preset(&req.preset, req.seed.unwrap_or(1))?);
    }
    Ok(ScenarioConfig::from_json(&value.to_string())?)
}

async fn create_run(State(st): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let cfg = parse_request(&body)?;
    let handle = st.registry.create(cfg);
    Ok((StatusCode::CREATED, Json(handle)).into_response())
}

async fn get_run(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let entry = st.registry.get(&id).ok_or_else(|| ApiError::not_found(&id))?;
    Ok(Json(entry.handle()).into_response())
}

async fn cancel_run(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    match st.registry.cancel(&id) {
        Ok(h) => Ok(Json(h).into_response()),
        Err(CancelError::NotFound) => Err(ApiError::not_found(&id)),
        Err(CancelError::Conflict(state)) => Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("run `{id}` is already {}", serde_json::to_value(state).unwrap().as_str().unwrap()),
        )),
    }
}

async fn run_log(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let entry = st.registry.get(&id).ok_or_else(|| ApiError::not_found(&id))?;
    if !entry.is_finished() {
        return Err(ApiError::new(StatusCode::CONFLICT, "run still in progress"));
    }
    let path = entry
        .handle()
        .log_path
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "run produced no log"))?;
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("{}: {e}", path.display())))?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], bytes).into_response())
}

#[derive(Deserialize)]
struct StreamParams {
    /// Index of the first sample to send (resume point).
    #[serde(default)]
    from: usize,
    /// Simulated seconds per wall second; `inf` disables throttling.
    #[serde(default)]
    speed: Option<String>,
}

fn parse_speed(s: Option<&str>) -> Result<Option<f64>, ApiError> {
    match s {
        None => Ok(Some(DEFAULT_SPEED)),
        Some("inf") | Some("infinity") => Ok(None),
        Some(v) => match v.parse::<f64>() {
            Ok(x) if x.is_infinite() && x > 0.0 => Ok(None),
            Ok(x) if x > 0.0 => Ok(Some(x)),
            _ => Err(ApiError::new(StatusCode::BAD_REQUEST, format!("speed must be > 0 or `inf` (got `{v}`)"))),
        },
    }
}

struct Feed {
    entry: Arc<RunEntry>,
    rx: tokio::sync::watch::Receiver<u64>,
    next: usize,
    pending: std::collections::VecDeque<Line>,
    speed: Option<f64>,
    /// Wall clock and simulated time of the first emitted sample.
    origin: Option<(Instant, f64)>,
    done: bool,
}

impl Feed {
    async fn next_event(&mut self) -> Option<String> {
        if self.done {
            return None;
        }
        loop {
            if let Some(line) = self.pending.pop_front() {
                self.pace(line.t).await;
                let seq = self.next;
                self.next += 1;
                return Some(format!(
                    "{{\"type\":\"sample\",\"schema_version\":{SCHEMA_VERSION},\"seq\":{seq},\"sample\":{}}}\n",
                    line.json
                ));
            }
            // Read the finished flag before the buffer so a sample appended
            // just before finishing is never skipped.
            let finished = self.entry.is_finished();
            self.pending.extend(self.entry.lines_from(self.next));
            if !self.pending.is_empty() {
                continue;
            }
            if finished {
                self.done = true;
                return Some(self.terminal_event());
            }
            if self.rx.changed().await.is_err() {
                self.done = true;
                return Some(self.terminal_event());
            }
        }
    }

    async fn pace(&mut self, t: f64) {
        let Some(speed) = self.speed else { return };
        match self.origin {
            None => self.origin = Some((Instant::now(), t)),
            Some((wall, t0)) => {
                let due = wall + Duration::from_secs_f64(((t - t0) / speed).max(0.0));
                tokio::time::sleep_until(due).await;
            }
        }
    }

    fn terminal_event(&self) -> String {
        let h = self.entry.handle();
        let mut ev = json!({
            "type": "summary",
            "schema_version": SCHEMA_VERSION,
            "run_id": h.run_id,
            "state": h.state,
            "samples": self.next,
            "summary": h.summary,
        });
        if let Some(e) = h.error {
            ev["error"] = Value::String(e);
        }
        let mut s = ev.to_string();
        s.push('\n');
        s
    }
}

async fn stream_run(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(params): Query<StreamParams>,
) -> Result<Response, ApiError> {
    let entry = st.registry.get(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let speed = parse_speed(params.speed.as_deref())?;
    let loader = entry.clone();
    tokio::task::spawn_blocking(move || loader.load_from_disk())
        .await
        .expect("loader task")
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("reading stored log: {e}")))?;
    let feed = Feed {
        rx: entry.subscribe(),
        entry,
        next: params.from,
        pending: Default::default(),
        speed,
        origin: None,
        done: false,
    };
    let stream = futures::stream::unfold(feed, |mut feed| async move {
        let ev = feed.next_event().await?;
        Some((Ok::<_, Infallible>(Bytes::from(ev)), feed))
    });
    Ok((
        [(header::CONTENT_TYPE, "application/x-ndjson"), (header::CACHE_CONTROL, "no-cache")],
        Body::from_stream(stream),
    )
        .into_response())
}
