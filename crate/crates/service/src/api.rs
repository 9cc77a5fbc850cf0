//! JSON-over-HTTP interface.
//!
//! | method | path | success |
//! |---|---|---|
//! | `POST` | `/graphs` | 201 graph |
//! | `GET` | `/graphs` | 200 summaries |
//! | `GET` | `/graphs/{id}` | 200 graph, `ETag` |
//! | `PUT` | `/graphs/{id}` | 200 graph (`If-Match` required) |
//! | `DELETE` | `/graphs/{id}` | 204 |
//! | `POST` | `/graphs/generate` | 201 graph |
//! | `POST` | `/graphs/{id}/expand` | 200 graph |
//! | `GET` | `/graphs/{id}/validate` | 200 diagnostics |
//! | `GET` | `/graphs/{id}/dot?session=` | 200 DOT text |
//! | `GET` | `/graphs/{id}/cohort-summary` | 200 counts |
//! | `GET` | `/templates` | 200 template list |
//! | `POST` | `/templates/{tid}/instantiate` | 201 graph |
//! | `GET` | `/sessions?graph_id=` | 200 sessions |
//! | `POST` | `/sessions` | 201 `{session, avatar_utterance}` |
//! | `GET` | `/sessions/{id}` | 200 session, `ETag` |
//! | `POST` | `/sessions/{id}/turns` | 200 turn |
//! | `POST` | `/sessions/{id}/end` | 200 session |
//! | `GET` | `/sessions/{id}/report` | 200 report |
//!
//! Errors are `{"code", "message"}` with an optional `details` value.

use std::collections::HashSet;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use gloss_core::analysis::{cohort_summary, overlay_dot, path_of, session_report, AnalysisError};
use gloss_core::authoring::json::{from_value, to_value};
use gloss_core::authoring::templates::{instantiate_template, templates};
use gloss_core::authoring::{expand_node, generate_graph, render_dot, GenerateError};
use gloss_core::graph::GraphError;
use gloss_core::ids::GraphId;
use gloss_core::llm::GatewayError;
use gloss_core::session::{Session, SessionEngine, SessionError, Turn};
use gloss_core::validate::{has_errors, validate};
use gloss_core::{NarrativeGraph, ProviderHandle};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::store::{DocumentStore, Kind, StoreError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            details: None,
        }
    }

    fn with_details(mut self, details: Value) -> Self {
        self.details = Some(details);
        self
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "bad_request", message)
    }

    pub fn validation_failed(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "validation_failed", message)
    }

    pub fn session_busy(id: &str) -> Self {
        Self::new(StatusCode::CONFLICT, "session_busy", format!("session `{id}` is processing another turn"))
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal_error", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound { .. } => ApiError::not_found(e.to_string()),
            StoreError::VersionConflict { current, .. } => {
                ApiError::new(StatusCode::CONFLICT, "version_conflict", e.to_string())
                    .with_details(json!({ "current_version": current }))
            }
            StoreError::InvalidId(_) | StoreError::InvalidBody(_) => ApiError::bad_request(e.to_string()),
            StoreError::Corrupt { .. } | StoreError::Io(_) => ApiError::internal(e.to_string()),
        }
    }
}

impl From<GatewayError> for ApiError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::EmptyPrompt | GatewayError::EmptyUtterance | GatewayError::EmptyCandidates => {
                ApiError::bad_request(e.to_string())
            }
            _ => ApiError::new(StatusCode::BAD_GATEWAY, "provider_error", e.to_string()),
        }
    }
}

impl From<GraphError> for ApiError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::UnknownNode(_) | GraphError::UnknownEdge(_) => ApiError::not_found(e.to_string()),
            _ => ApiError::validation_failed(e.to_string()),
        }
    }
}

impl From<GenerateError> for ApiError {
    fn from(e: GenerateError) -> Self {
        match e {
            GenerateError::Gateway(g) => g.into(),
            GenerateError::Graph(g) => g.into(),
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::InvalidGraph(diags) => ApiError::validation_failed("graph has error diagnostics")
                .with_details(serde_json::to_value(diags).expect("diagnostics serialize")),
            SessionError::EmptyGraph | SessionError::Graph(_) => ApiError::validation_failed(e.to_string()),
            SessionError::Provider(g) => g.into(),
            SessionError::InvalidThreshold(_)
            | SessionError::SessionCompleted
            | SessionError::EmptyUtterance
            | SessionError::GraphMismatch { .. } => ApiError::bad_request(e.to_string()),
        }
    }
}

impl From<AnalysisError> for ApiError {
    fn from(e: AnalysisError) -> Self {
        ApiError::bad_request(e.to_string())
    }
}

type ApiResult<T = Response> = Result<T, ApiError>;

/// Shared service state. Cloning is cheap.
#[derive(Clone)]
pub struct AppState {
    store: Arc<DocumentStore>,
    engine: Arc<SessionEngine>,
    token: Option<Arc<str>>,
    busy: Arc<Mutex<HashSet<String>>>,
}

impl AppState {
    pub fn new(store: DocumentStore, provider: ProviderHandle) -> Self {
        Self::with_engine(store, SessionEngine::new(provider))
    }

    pub fn with_engine(store: DocumentStore, engine: SessionEngine) -> Self {
        Self {
            store: Arc::new(store),
            engine: Arc::new(engine),
            token: None,
            busy: Arc::default(),
        }
    }

    /// Requires `Authorization: Bearer <token>` on every request.
    pub fn with_token(mut self, token: Option<String>) -> Self {
        self.token = token.filter(|t| !t.is_empty()).map(Into::into);
        self
    }

    pub fn store(&self) -> &DocumentStore {
        &self.store
    }

    fn claim(&self, session: &str) -> ApiResult<BusyGuard> {
        if !self.busy.lock().unwrap().insert(session.to_string()) {
            return Err(ApiError::session_busy(session));
        }
        Ok(BusyGuard {
            set: self.busy.clone(),
            id: session.to_string(),
        })
    }
}

struct BusyGuard {
    set: Arc<Mutex<HashSet<String>>>,
    id: String,
}

impl Drop for BusyGuard {
    fn drop(&mut self) {
        self.set.lock().unwrap().remove(&self.id);
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/graphs", post(create_graph).get(list_graphs))
        .route("/graphs/generate", post(generate))
        .route("/graphs/{id}", get(get_graph).put(put_graph).delete(delete_graph))
        .route("/graphs/{id}/expand", post(expand))
        .route("/graphs/{id}/validate", get(validate_graph))
        .route("/graphs/{id}/dot", get(dot))
        .route("/graphs/{id}/cohort-summary", get(cohort))
        .route("/templates", get(list_templates))
        .route("/templates/{tid}/instantiate", post(instantiate))
        .route("/sessions", post(start_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/turns", post(submit_turn))
        .route("/sessions/{id}/end", post(end_session))
        .route("/sessions/{id}/report", get(report))
        .layer(middleware::from_fn_with_state(state.clone(), authorize))
        .with_state(state)
}

pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

async fn authorize(State(state): State<AppState>, request: Request, next: Next) -> Response {
    if let Some(token) = &state.token {
        let presented = request
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if presented != Some(token) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token")
                .into_response();
        }
    }
    next.run(request).await
}

/// Runs store and provider work off the async executor.
async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> ApiResult<T> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| {
        let err = ApiError::bad_request(format!("request body: {e}"));
        if e.is_data() {
            err
        } else {
            ApiError { status: StatusCode::BAD_REQUEST, ..err }
        }
    })
}

fn etag(version: u64) -> HeaderValue {
    HeaderValue::from_str(&format!("\"{version}\"")).expect("digits are valid header text")
}

/// `None` for a missing header or `*`.
fn if_match(headers: &HeaderMap) -> ApiResult<Option<u64>> {
    let Some(raw) = headers.get(header::IF_MATCH) else {
        return Ok(None);
    };
    let text = raw.to_str().unwrap_or_default().trim();
    if text == "*" {
        return Ok(None);
    }
    text.trim_start_matches("W/")
        .trim_matches('"')
        .parse()
        .map(Some)
        .map_err(|_| ApiError::bad_request(format!("If-Match `{text}` is not a version")))
}

fn graph_response(status: StatusCode, graph: &NarrativeGraph) -> Response {
    (status, [(header::ETAG, etag(graph.version))], Json(to_value(graph))).into_response()
}

fn reject_invalid(graph: &NarrativeGraph) -> ApiResult<()> {
    let errors: Vec<_> = validate(graph).into_iter().filter(|d| d.is_error()).collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(ApiError::validation_failed("graph has error diagnostics")
            .with_details(serde_json::to_value(errors).expect("diagnostics serialize")))
    }
}

fn graph_from_body(mut value: Value, id: Option<&str>) -> ApiResult<NarrativeGraph> {
    let obj = value
        .as_object_mut()
        .ok_or_else(|| ApiError::bad_request("graph body must be an object"))?;
    match id {
        Some(id) => match obj.get("id").and_then(Value::as_str) {
            Some(body_id) if body_id != id => {
                return Err(ApiError::bad_request(format!("body id `{body_id}` does not match `{id}`")))
            }
            _ => {
                obj.insert("id".into(), json!(id));
            }
        },
        None => {
            obj.entry("id").or_insert_with(|| json!(GraphId::fresh()));
        }
    }
    obj.entry("version").or_insert(json!(1));
    obj.entry("metadata").or_insert(json!({}));
    from_value(value).map_err(|e| ApiError::bad_request(e.to_string()).with_details(json!({ "pointer": e.pointer() })))
}

async fn create_graph(State(state): State<AppState>, body: Bytes) -> ApiResult {
    let value: Value = parse_body(&body)?;
    blocking(move || {
        let graph = graph_from_body(value, None)?;
        reject_invalid(&graph)?;
        if state.store.get(Kind::Graph, graph.id.as_str()).is_ok() {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "version_conflict",
                format!("graph `{}` already exists", graph.id),
            ));
        }
        let stored = state.store.put_graph(&graph, None)?;
        Ok(graph_response(StatusCode::CREATED, &stored))
    })
    .await
}

#[derive(Serialize)]
struct GraphSummary {
    id: String,
    title: String,
    mode: String,
    version: u64,
    nodes: usize,
    edges: usize,
}

async fn list_graphs(State(state): State<AppState>) -> ApiResult {
    blocking(move || {
        let mut out = Vec::new();
        for doc in state.store.list(Kind::Graph)? {
            let g = state.store.get_graph(&doc.id)?;
            out.push(GraphSummary {
                id: g.id.to_string(),
                title: g.title.clone(),
                mode: g.mode.as_str().to_string(),
                version: g.version,
                nodes: g.nodes.len(),
                edges: g.edges.len(),
            });
        }
        Ok(Json(out).into_response())
    })
    .await
}

async fn get_graph(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    blocking(move || Ok(graph_response(StatusCode::OK, &state.store.get_graph(&id)?))).await
}

async fn put_graph(State(state): State<AppState>, Path(id): Path<String>, headers: HeaderMap, body: Bytes) -> ApiResult {
    if !headers.contains_key(header::IF_MATCH) {
        return Err(ApiError::new(
            StatusCode::PRECONDITION_REQUIRED,
            "bad_request",
            "PUT requires an If-Match header",
        ));
    }
    let expected = if_match(&headers)?;
    let value: Value = parse_body(&body)?;
    blocking(move || {
        let graph = graph_from_body(value, Some(&id))?;
        reject_invalid(&graph)?;
        state.store.get(Kind::Graph, &id)?;
        let stored = state.store.put_graph(&graph, expected)?;
        Ok(graph_response(StatusCode::OK, &stored))
    })
    .await
}

async fn delete_graph(State(state): State<AppState>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult {
    let expected = if_match(&headers)?;
    blocking(move || {
        state.store.delete(Kind::Graph, &id, expected)?;
        Ok(StatusCode::NO_CONTENT.into_response())
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerateBody {
    prompt: String,
}

async fn generate(State(state): State<AppState>, body: Bytes) -> ApiResult {
    let GenerateBody { prompt } = parse_body(&body)?;
    blocking(move || {
        let graph = generate_graph(state.engine.provider(), &prompt)?;
        let stored = state.store.put_graph(&graph, None)?;
        Ok(graph_response(StatusCode::CREATED, &stored))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExpandBody {
    node_id: String,
    #[serde(default)]
    instruction: String,
}

async fn expand(State(state): State<AppState>, Path(id): Path<String>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let expected = if_match(&headers)?;
    let ExpandBody { node_id, instruction } = parse_body(&body)?;
    blocking(move || {
        let mut retried = false;
        loop {
            let graph = state.store.get_graph(&id)?;
            if let Some(v) = expected.filter(|v| *v != graph.version) {
                return Err(StoreError::VersionConflict {
                    kind: Kind::Graph,
                    id,
                    expected: v,
                    current: Some(graph.version),
                }
                .into());
            }
            let next = expand_node(state.engine.provider(), &graph, &node_id, &instruction)?;
            match state.store.put_graph(&next, Some(graph.version)) {
                Ok(stored) => return Ok(graph_response(StatusCode::OK, &stored)),
                Err(StoreError::VersionConflict { .. }) if !retried && expected.is_none() => retried = true,
                Err(e) => return Err(e.into()),
            }
        }
    })
    .await
}

async fn validate_graph(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    blocking(move || {
        let graph = state.store.get_graph(&id)?;
        let diagnostics = validate(&graph);
        Ok(Json(json!({
            "graph_id": graph.id,
            "version": graph.version,
            "valid": !has_errors(&diagnostics),
            "diagnostics": diagnostics,
        }))
        .into_response())
    })
    .await
}

#[derive(Deserialize)]
struct DotQuery {
    session: Option<String>,
}

async fn dot(State(state): State<AppState>, Path(id): Path<String>, Query(q): Query<DotQuery>) -> ApiResult {
    blocking(move || {
        let graph = state.store.get_graph(&id)?;
        let text = match q.session {
            None => render_dot(&graph, None).expect("no highlight to resolve"),
            Some(sid) => {
                let (session, _) = state.store.get_session(&sid)?;
                if session.graph_id != graph.id {
                    return Err(ApiError::bad_request(format!("session `{sid}` does not belong to graph `{id}`")));
                }
                overlay_dot(&graph, &session)?
            }
        };
        Ok(([(header::CONTENT_TYPE, "text/vnd.graphviz; charset=utf-8")], text).into_response())
    })
    .await
}

async fn cohort(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    blocking(move || {
        let graph = state.store.get_graph(&id)?;
        let (usable, skipped): (Vec<Session>, Vec<Session>) = state
            .store
            .sessions()?
            .into_iter()
            .filter(|s| s.graph_id == graph.id)
            .partition(|s| path_of(s, &graph).is_ok());
        let summary = cohort_summary(&graph, &usable)?;
        let mut value = serde_json::to_value(summary).expect("summaries serialize");
        let skipped: Vec<_> = skipped.into_iter().map(|s| s.id).collect();
        value["skipped_sessions"] = json!(skipped);
        Ok(Json(value).into_response())
    })
    .await
}

async fn list_templates() -> Json<Value> {
    let list: Vec<Value> = templates()
        .into_iter()
        .map(|t| json!({ "id": t.id, "title": t.title, "nodes": t.graph.nodes.len(), "edges": t.graph.edges.len() }))
        .collect();
    Json(json!(list))
}

async fn instantiate(State(state): State<AppState>, Path(tid): Path<String>) -> ApiResult {
    blocking(move || {
        let graph = instantiate_template(&tid).map_err(|e| ApiError::not_found(e.to_string()))?;
        let stored = state.store.put_graph(&graph, None)?;
        Ok(graph_response(StatusCode::CREATED, &stored))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StartBody {
    graph_id: String,
    threshold: Option<f64>,
}

async fn start_session(State(state): State<AppState>, body: Bytes) -> ApiResult {
    let StartBody { graph_id, threshold } = parse_body(&body)?;
    blocking(move || {
        let graph = state.store.get_graph(&graph_id)?;
        let (session, opening) = state.engine.start_session(&graph, threshold)?;
        let version = state.store.put_session(&session, None)?;
        Ok((
            StatusCode::CREATED,
            [(header::ETAG, etag(version))],
            Json(json!({ "session": session, "avatar_utterance": opening })),
        )
            .into_response())
    })
    .await
}

#[derive(Deserialize)]
struct SessionQuery {
    graph_id: Option<String>,
}

async fn list_sessions(State(state): State<AppState>, Query(q): Query<SessionQuery>) -> ApiResult {
    blocking(move || {
        let sessions: Vec<Session> = state
            .store
            .sessions()?
            .into_iter()
            .filter(|s| q.graph_id.as_deref().is_none_or(|g| s.graph_id.as_str() == g))
            .collect();
        Ok(Json(sessions).into_response())
    })
    .await
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    blocking(move || {
        let (session, version) = state.store.get_session(&id)?;
        Ok(([(header::ETAG, etag(version))], Json(session)).into_response())
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TurnBody {
    utterance: String,
}

/// Graph first, then session: a turn is only visible once both are stored.
/// A concurrent graph edit forces one re-read and re-run of the turn.
fn run_turn(state: &AppState, id: &str, utterance: &str) -> ApiResult<Turn> {
    let _busy = state.claim(id)?;
    let (session, session_version) = state.store.get_session(id)?;
    let mut retried = false;
    loop {
        let graph = state.store.get_graph(session.graph_id.as_str())?;
        let (next, next_graph, turn) = state.engine.submit_turn(&session, &graph, utterance)?;
        if next_graph != graph {
            match state.store.put_graph(&next_graph, Some(graph.version)) {
                Ok(_) => {}
                Err(StoreError::VersionConflict { .. }) if !retried => {
                    retried = true;
                    continue;
                }
                Err(e) => return Err(e.into()),
            }
        }
        state.store.put_session(&next, Some(session_version))?;
        return Ok(turn);
    }
}

async fn submit_turn(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let TurnBody { utterance } = parse_body(&body)?;
    blocking(move || Ok(Json(run_turn(&state, &id, &utterance)?).into_response())).await
}

async fn end_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    blocking(move || {
        let _busy = state.claim(&id)?;
        let (session, version) = state.store.get_session(&id)?;
        let ended = state.engine.end_session(&session)?;
        let version = state.store.put_session(&ended, Some(version))?;
        Ok(([(header::ETAG, etag(version))], Json(ended)).into_response())
    })
    .await
}

async fn report(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    blocking(move || {
        let (session, _) = state.store.get_session(&id)?;
        let path = state
            .store
            .get_graph(session.graph_id.as_str())
            .ok()
            .and_then(|g| path_of(&session, &g).ok())
            .map(|p| p.to_ids());
        let mut value = serde_json::to_value(session_report(&session)).expect("reports serialize");
        value["path"] = json!(path);
        Ok(Json(value).into_response())
    })
    .await
}
