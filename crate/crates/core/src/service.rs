//! HTTP service putting an analyst in the loop as the oracle.
//!
//! Each session wraps a [`RunEngine`]. `GET …/next` proposes the next
//! transaction (idempotent until answered), `POST …/label` answers it. In
//! replay mode a missing label is filled from the dataset's hidden labels.
//!
//! With a state directory, every session writes its configuration and an
//! append-only log of answered steps; on start-up the logs are replayed to
//! rebuild the sessions. A step costs one estimator refit, typically tens of
//! milliseconds on pools of a few thousand rows with the default forest.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use crate::config::{PolicyKind, RunConfig};
use crate::datapool::{Dataset, Label, RowId};
use crate::error::{Error, Result};
use crate::harness::{log_lines, read_log, RunEngine, StepRecord};

const META_FILE: &str = "session.json";
const LOG_FILE: &str = "log.jsonl";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SessionMeta {
    config: String,
    policy: String,
    replay: bool,
}

struct Session {
    engine: RunEngine,
    dataset: Arc<Dataset>,
    replay: bool,
    log: Option<File>,
}

impl Session {
    fn summary(&self) -> Value {
        json!({
            "t": self.engine.records().len(),
            "cum_reward": self.engine.cum_reward(),
            "n_labeled": self.engine.pool().n_labeled(),
            "n_unlabeled": self.engine.pool().n_unlabeled(),
            "truncated": self.engine.records().len() < self.engine.horizon(),
        })
    }
}

/// Shared service state.
pub struct AppState {
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    state_dir: Option<PathBuf>,
}

impl AppState {
    /// A service without persistence.
    pub fn in_memory() -> Self {
        AppState {
            sessions: RwLock::new(HashMap::new()),
            state_dir: None,
        }
    }

    /// A service persisting to `dir`, with every session found there replayed.
    pub fn with_state_dir(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let state = AppState {
            sessions: RwLock::new(HashMap::new()),
            state_dir: Some(dir.clone()),
        };
        let entries = fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            if !path.join(META_FILE).exists() {
                continue;
            }
            let id = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
            match recover_session(&path) {
                Ok(session) => {
                    log::info!("recovered session {id} at t={}", session.engine.records().len());
                    state.sessions.write().unwrap().insert(id, Arc::new(Mutex::new(session)));
                }
                Err(e) => log::warn!("cannot recover session {id}: {e}"),
            }
        }
        Ok(state)
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().unwrap().len()
    }

    fn get(&self, id: &str) -> Option<Arc<Mutex<Session>>> {
        self.sessions.read().unwrap().get(id).cloned()
    }
}

fn recover_session(dir: &Path) -> Result<Session> {
    let meta_path = dir.join(META_FILE);
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: SessionMeta = serde_json::from_str(&text).map_err(|e| Error::Runtime(e.to_string()))?;
    let config = RunConfig::from_text(&meta.config)?;
    let policy: PolicyKind = meta.policy.parse()?;
    let dataset = Arc::new(config.load_dataset()?);
    let mut engine = RunEngine::new(Arc::clone(&dataset), &config, policy)?;
    let log_path = dir.join(LOG_FILE);
    let records = if log_path.exists() { read_log(&log_path)? } else { Vec::new() };
    for rec in &records {
        let p = engine
            .propose()?
            .ok_or_else(|| Error::Runtime(format!("log continues past the end of the run at t={}", rec.t)))?;
        if p.row_id != rec.row_id {
            return Err(Error::Runtime(format!(
                "log diverges at t={}: expected row {}, logged {}",
                rec.t, p.row_id, rec.row_id
            )));
        }
        engine.resolve(rec.label)?;
    }
    let log = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&log_path)
        .map_err(|e| Error::io(&log_path, e))?;
    Ok(Session {
        engine,
        dataset,
        replay: meta.replay,
        log: Some(log),
    })
}

/// Error response with a JSON `{ "error": … }` body.
struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

fn not_found(id: &str) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, format!("no session `{id}`"))
}

fn unprocessable(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::UNPROCESSABLE_ENTITY, msg.into())
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

fn config_from_body(body: &Value) -> ApiResult<(RunConfig, PolicyKind, bool)> {
    let mut config = RunConfig::default();
    if let Some(text) = body.get("config_text").and_then(Value::as_str) {
        config.apply_text(text).map_err(|e| unprocessable(e.to_string()))?;
    }
    match body.get("config") {
        None | Some(Value::Null) => {}
        Some(Value::Object(map)) => {
            for (k, v) in map {
                let value = match v {
                    Value::String(s) => s.clone(),
                    Value::Array(items) => items
                        .iter()
                        .map(|i| i.as_str().map_or_else(|| i.to_string(), str::to_string))
                        .collect::<Vec<_>>()
                        .join(","),
                    other => other.to_string(),
                };
                config.set(k, &value).map_err(|e| unprocessable(e.to_string()))?;
            }
        }
        Some(_) => return Err(unprocessable("`config` must be an object of key/value pairs")),
    }
    let policy = match body.get("policy") {
        Some(Value::String(p)) => p.parse().map_err(|e: Error| unprocessable(e.to_string()))?,
        Some(_) => return Err(unprocessable("`policy` must be a string")),
        None => *config
            .strategies
            .first()
            .ok_or_else(|| unprocessable("`strategies` is empty"))?,
    };
    let replay = match body.get("replay") {
        None => false,
        Some(v) => v.as_bool().ok_or_else(|| unprocessable("`replay` must be a boolean"))?,
    };
    config.validate().map_err(|e| unprocessable(e.to_string()))?;
    Ok((config, policy, replay))
}

fn new_session_id(state: &AppState) -> String {
    let mut rng = rand::thread_rng();
    loop {
        let id = format!("{:016x}", rng.gen::<u64>());
        if state.get(&id).is_none() {
            return id;
        }
    }
}

async fn create_session(State(state): State<Arc<AppState>>, body: Option<Json<Value>>) -> ApiResult<Response> {
    let body = body.map(|Json(v)| v).unwrap_or(Value::Null);
    let (config, policy, replay) = config_from_body(&body)?;
    let state2 = Arc::clone(&state);
    blocking(move || {
        let dataset = Arc::new(config.load_dataset().map_err(|e| unprocessable(e.to_string()))?);
        let engine = RunEngine::new(Arc::clone(&dataset), &config, policy).map_err(|e| unprocessable(e.to_string()))?;
        let id = new_session_id(&state2);
        let log = match &state2.state_dir {
            Some(dir) => {
                let sdir = dir.join(&id);
                fs::create_dir_all(&sdir).map_err(|e| Error::io(&sdir, e))?;
                let meta = SessionMeta {
                    config: config.dump(),
                    policy: policy.to_string(),
                    replay,
                };
                let meta_path = sdir.join(META_FILE);
                fs::write(&meta_path, serde_json::to_string_pretty(&meta).expect("meta serializes"))
                    .map_err(|e| Error::io(&meta_path, e))?;
                let log_path = sdir.join(LOG_FILE);
                Some(File::create(&log_path).map_err(|e| Error::io(&log_path, e))?)
            }
            None => None,
        };
        let session = Session {
            engine,
            dataset,
            replay,
            log,
        };
        state2
            .sessions
            .write()
            .unwrap()
            .insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok((StatusCode::CREATED, Json(json!({ "session_id": id }))).into_response())
    })
    .await
}

async fn get_next(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let session = state.get(&id).ok_or_else(|| not_found(&id))?;
    blocking(move || {
        let mut s = session.lock().unwrap();
        let Some(p) = s.engine.propose()? else {
            let summary = s.summary();
            return Ok((StatusCode::GONE, Json(json!({ "done": true, "summary": summary }))).into_response());
        };
        let p1 = s.engine.estimated_p1(p.row_id)?;
        let names = s.engine.features().names().to_vec();
        let values = s.engine.features().row(p.row_id).to_vec();
        let features: Vec<Value> = names
            .iter()
            .zip(values)
            .map(|(n, v)| json!({ "name": n, "value": v }))
            .collect();
        Ok(Json(json!({
            "session_id": id,
            "t": p.t,
            "row_id": p.row_id,
            "features": features,
            "p1": p1,
            "strategy": p.strategy,
        }))
        .into_response())
    })
    .await
}

fn parse_label(v: &Value) -> Option<Label> {
    match v {
        Value::Number(n) => n.as_u64().and_then(|x| u8::try_from(x).ok()).and_then(Label::from_u8),
        Value::Bool(b) => Some(if *b { Label::Fraud } else { Label::Legit }),
        _ => None,
    }
}

async fn post_label(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Option<Json<Value>>,
) -> ApiResult<Response> {
    let session = state.get(&id).ok_or_else(|| not_found(&id))?;
    let body = body.map(|Json(v)| v).ok_or_else(|| unprocessable("expected a JSON body {row_id, label}"))?;
    let row_id = body
        .get("row_id")
        .and_then(Value::as_u64)
        .map(|r| RowId(r as usize))
        .ok_or_else(|| unprocessable("`row_id` must be a non-negative integer"))?;
    let label = match body.get("label") {
        None | Some(Value::Null) => None,
        Some(v) => Some(parse_label(v).ok_or_else(|| unprocessable(format!("label {v} is not 0 or 1")))?),
    };
    blocking(move || {
        let mut s = session.lock().unwrap();
        let pending = s.engine.pending().cloned();
        match pending {
            Some(p) if p.row_id == row_id => {}
            Some(p) => {
                return Err(ApiError(
                    StatusCode::CONFLICT,
                    format!("row {row_id} is not the pending query (pending: {})", p.row_id),
                ))
            }
            None => return Err(ApiError(StatusCode::CONFLICT, format!("no query is pending for row {row_id}"))),
        }
        let label = match (label, s.replay) {
            (Some(l), _) => l,
            (None, true) => s.dataset.labels.label(row_id)?,
            (None, false) => return Err(unprocessable("`label` is required (0 or 1)")),
        };
        let record = s.engine.resolve(label)?;
        if let Some(log) = s.log.as_mut() {
            let line = log_lines(std::slice::from_ref(&record));
            log.write_all(line.as_bytes())
                .and_then(|_| log.sync_data())
                .map_err(|e| Error::Runtime(format!("cannot append to session log: {e}")))?;
        }
        let mut out = json!({
            "t": record.t,
            "row_id": record.row_id,
            "label": record.label,
            "reward": record.reward,
            "cum_reward": record.cum_reward,
        });
        if let Some(w) = &record.weights {
            out["weights"] = json!(w);
        }
        Ok(Json(out).into_response())
    })
    .await
}

async fn get_state(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let session = state.get(&id).ok_or_else(|| not_found(&id))?;
    let s = session.lock().unwrap();
    let records: &[StepRecord] = s.engine.records();
    let weights_history: Vec<&Vec<f64>> = records.iter().filter_map(|r| r.weights.as_ref()).collect();
    let pending = s.engine.pending().map(|p| json!({ "t": p.t, "row_id": p.row_id, "strategy": p.strategy }));
    Ok(Json(json!({
        "session_id": id,
        "policy": s.engine.policy().to_string(),
        "t": records.len(),
        "cum_reward": s.engine.cum_reward(),
        "rewards": records.iter().map(|r| r.reward).collect::<Vec<_>>(),
        "cum_rewards": records.iter().map(|r| r.cum_reward).collect::<Vec<_>>(),
        "weights": s.engine.weights().map(|w| w.as_slice().to_vec()),
        "weights_history": weights_history,
        "n_labeled": s.engine.pool().n_labeled(),
        "n_unlabeled": s.engine.pool().n_unlabeled(),
        "horizon": s.engine.horizon(),
        "pending": pending,
        "finished": s.engine.is_finished(),
    }))
    .into_response())
}

async fn get_log(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let session = state.get(&id).ok_or_else(|| not_found(&id))?;
    let body = log_lines(session.lock().unwrap().engine.records());
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

/// Routes of the service; `static_dir`, when given, is served at `/`.
pub fn router(state: Arc<AppState>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/next", get(get_next))
        .route("/api/sessions/{id}/label", post(post_label))
        .route("/api/sessions/{id}/state", get(get_state))
        .route("/api/sessions/{id}/log", get(get_log))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serve until the process is stopped.
pub async fn serve(addr: std::net::SocketAddr, state: Arc<AppState>, static_dir: Option<PathBuf>) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::Runtime(format!("cannot bind {addr}: {e}")))?;
    log::info!("listening on http://{addr}");
    axum::serve(listener, router(state, static_dir.as_deref()))
        .await
        .map_err(|e| Error::Runtime(e.to_string()))
}

/// Expected per-step latency bound used in the docs and tests.
pub const STEP_LATENCY_BUDGET: Duration = Duration::from_secs(2);
