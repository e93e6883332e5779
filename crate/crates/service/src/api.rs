//! HTTP endpoints. Every error body is `{code, message}`.

use std::collections::HashMap;
use std::convert::Infallible;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as JsonValue};
use tokio::sync::{broadcast, Mutex, Semaphore};
use vizagent_core::agents::{
    orchestrate, CompletionParams, ModelClient, OrchestrateError, OrchestrateOptions, PromptBundle,
    StageEvent,
};
use vizagent_core::catalog::{render_description, ColumnDef, DatabaseCatalog};
use vizagent_core::print_vql;

use crate::config::ServiceConfig;
use crate::store::{Databases, HistoryEntry, SessionFiles, SessionHeader, StoreError};

const MAX_UPLOAD: usize = 64 << 20;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(json!({"code": self.code, "message": self.message})),
        )
            .into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let (status, code) = match &e {
            StoreError::DatabaseNotFound(_) => (StatusCode::NOT_FOUND, "DATABASE_NOT_FOUND"),
            StoreError::SessionNotFound(_) => (StatusCode::NOT_FOUND, "SESSION_NOT_FOUND"),
            StoreError::DatabaseExists(_) => (StatusCode::CONFLICT, "DATABASE_EXISTS"),
            StoreError::BadDatabaseId(_) => (StatusCode::BAD_REQUEST, "BAD_DATABASE_ID"),
            StoreError::UnsafeEntry(_) => (StatusCode::BAD_REQUEST, "UNSAFE_ARCHIVE"),
            StoreError::Archive(_) | StoreError::Catalog(_) => {
                (StatusCode::BAD_REQUEST, "BAD_ARCHIVE")
            }
            StoreError::Corrupt { .. } | StoreError::Io { .. } => {
                (StatusCode::INTERNAL_SERVER_ERROR, "STORAGE_ERROR")
            }
        };
        ApiError::new(status, code, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Live state of one session. The mutex queues queries so history order is
/// request order.
struct Session {
    header: SessionHeader,
    queue: Mutex<()>,
    events: broadcast::Sender<StageEvent>,
}

pub struct AppState {
    config: ServiceConfig,
    client: Arc<dyn ModelClient>,
    bundle: PromptBundle,
    databases: Databases,
    files: SessionFiles,
    sessions: std::sync::Mutex<HashMap<String, Arc<Session>>>,
    in_flight: Semaphore,
}

impl AppState {
    pub fn new(config: ServiceConfig, client: Arc<dyn ModelClient>) -> Result<Arc<Self>, String> {
        config.validate().map_err(|e| e.to_string())?;
        let bundle = PromptBundle::builtin()
            .with_shot_count(config.shot_count)
            .map_err(|e| e.to_string())?;
        Ok(Arc::new(AppState {
            databases: Databases::new(config.databases_dir()),
            files: SessionFiles::new(config.sessions_dir()),
            in_flight: Semaphore::new(config.max_in_flight),
            sessions: std::sync::Mutex::new(HashMap::new()),
            bundle,
            client,
            config,
        }))
    }

    /// The live session, loading its header from disk after a restart.
    fn session(&self, id: &str) -> ApiResult<Arc<Session>> {
        if let Some(s) = self.sessions.lock().unwrap().get(id) {
            return Ok(s.clone());
        }
        let header = self.files.load(id)?.header;
        let mut map = self.sessions.lock().unwrap();
        let s = map.entry(id.to_string()).or_insert_with(|| {
            Arc::new(Session {
                header,
                queue: Mutex::new(()),
                events: broadcast::channel(64).0,
            })
        });
        Ok(s.clone())
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/api/databases", get(list_databases).post(upload_database))
        .route("/api/databases/{db_id}/schema", get(schema))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/query", post(query))
        .route("/api/sessions/{id}/history", get(history))
        .route("/api/sessions/{id}/events", get(events))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD))
        .with_state(state)
}

async fn healthz() -> Json<JsonValue> {
    Json(json!({"status": "ok"}))
}

async fn list_databases(State(st): State<Arc<AppState>>) -> ApiResult<Json<JsonValue>> {
    Ok(Json(json!({"databases": st.databases.list()?})))
}

#[derive(Deserialize)]
struct UploadParams {
    db_id: String,
}

/// Body is the raw zip; the database name comes from `?db_id=`.
async fn upload_database(
    State(st): State<Arc<AppState>>,
    Query(p): Query<UploadParams>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<JsonValue>)> {
    let st2 = st.clone();
    let db_id = p.db_id.clone();
    let cat = tokio::task::spawn_blocking(move || st2.databases.install_zip(&db_id, &body))
        .await
        .map_err(|e| {
            ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string())
        })??;
    Ok((StatusCode::CREATED, Json(schema_json(&cat)?)))
}

#[derive(Serialize)]
struct TableSchema<'a> {
    name: &'a str,
    columns: &'a [ColumnDef],
}

fn schema_json(cat: &DatabaseCatalog) -> ApiResult<JsonValue> {
    let tables: Vec<TableSchema<'_>> = cat
        .tables()
        .iter()
        .map(|t| TableSchema {
            name: t.name(),
            columns: t.columns(),
        })
        .collect();
    let description = render_description(cat, None).map_err(StoreError::from)?;
    Ok(json!({"db_id": cat.db_id(), "tables": tables, "description": description}))
}

async fn schema(
    State(st): State<Arc<AppState>>,
    Path(db_id): Path<String>,
) -> ApiResult<Json<JsonValue>> {
    let cat = st.databases.get(&db_id)?;
    Ok(Json(schema_json(&cat)?))
}

#[derive(Deserialize)]
struct NewSession {
    db_id: String,
}

async fn create_session(
    State(st): State<Arc<AppState>>,
    body: Option<Json<NewSession>>,
) -> ApiResult<(StatusCode, Json<SessionHeader>)> {
    let Some(Json(req)) = body else {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "BAD_REQUEST",
            "body must be {\"db_id\": ...}",
        ));
    };
    st.databases.get(&req.db_id)?;
    let header = SessionHeader {
        session_id: uuid::Uuid::new_v4().simple().to_string(),
        db_id: req.db_id,
        created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
    };
    st.files.create(&header)?;
    st.session(&header.session_id)?;
    Ok((StatusCode::CREATED, Json(header)))
}

#[derive(Deserialize)]
struct QueryRequest {
    q: String,
}

/// Response body for one query; also what history stores.
pub fn query_body(
    result: &Result<vizagent_core::agents::Success, OrchestrateError>,
) -> Option<JsonValue> {
    match result {
        Ok(s) => {
            let vql = s.trace.final_chart.as_ref().map(|f| print_vql(&f.query));
            Some(json!({"vql": vql, "chart_spec": s.spec, "data": s.table, "trace": s.trace}))
        }
        Err(OrchestrateError::Failed(f)) => {
            Some(json!({"failure": {"last_error": f.last_error, "trace": f.trace}}))
        }
        Err(_) => None,
    }
}

async fn query(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Option<Json<QueryRequest>>,
) -> ApiResult<Json<JsonValue>> {
    let session = st.session(&id)?;
    let Some(Json(req)) = body else {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "BAD_REQUEST",
            "body must be {\"q\": ...}",
        ));
    };
    if req.q.trim().is_empty() {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "BAD_REQUEST",
            "empty query",
        ));
    }
    let _permit = st.in_flight.try_acquire().map_err(|_| {
        ApiError::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "BUSY",
            "too many queries in flight",
        )
    })?;
    let _turn = session.queue.lock().await;
    let catalog = st.databases.get(&session.header.db_id)?;

    let st2 = st.clone();
    let s2 = session.clone();
    let q = req.q.clone();
    let result = tokio::task::spawn_blocking(move || {
        let notify = |e: &StageEvent| {
            // no subscribers is fine
            let _ = s2.events.send(e.clone());
        };
        let opts = OrchestrateOptions {
            max_iters: st2.config.max_iters,
            params: CompletionParams::default(),
            bundle: &st2.bundle,
            observer: Some(&notify),
        };
        orchestrate(st2.client.as_ref(), &catalog, &q, &opts)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string()))?;

    let Some(body) = query_body(&result) else {
        let e = result.err().unwrap();
        let code = if matches!(e, OrchestrateError::Model(_)) {
            "MODEL_ERROR"
        } else {
            "AGENT_ERROR"
        };
        return Err(ApiError::new(StatusCode::BAD_GATEWAY, code, e.to_string()));
    };
    let entry = HistoryEntry {
        query: req.q,
        result: body.clone(),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
    };
    st.files.append(&id, &entry)?;
    Ok(Json(body))
}

async fn history(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Json<JsonValue>> {
    let session = st.session(&id)?;
    // wait out a running query so its entry is included
    let _turn = session.queue.lock().await;
    let rec = st.files.load(&id)?;
    Ok(Json(serde_json::to_value(rec).expect("record serializes")))
}

/// Stage events of queries in this session, as they happen.
async fn events(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    let rx = st.session(&id)?.events.subscribe();
    let stream = futures::stream::unfold(rx, |mut rx| async move {
        let ev = match rx.recv().await {
            Ok(e) => Event::default()
                .event("stage")
                .json_data(&e)
                .expect("event serializes"),
            Err(broadcast::error::RecvError::Lagged(n)) => {
                Event::default().event("lagged").data(n.to_string())
            }
            Err(broadcast::error::RecvError::Closed) => return None,
        };
        Some((Ok(ev), rx))
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

/// Binds and serves until ctrl-c.
pub async fn serve(state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(state.config.listen).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
