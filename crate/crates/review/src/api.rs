use std::path::{Component, Path as FsPath};
use std::sync::Arc;

use axum::body::Body;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::RwLock;

use crate::config::ServiceConfig;
use crate::store::{HumanAnswer, QueueQuery, ReviewError, Store, VerificationRecord};

pub const ANNOTATOR_HEADER: &str = "x-annotator-id";

pub struct AppState {
    pub store: RwLock<Store>,
    pub config: ServiceConfig,
}

pub type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/queue", get(queue))
        .route("/bundle/{id}", get(bundle))
        .route("/verdict", post(verdict))
        .route("/answer", post(answer))
        .route("/export", get(export))
        .route("/stats", get(stats))
        .route("/answers", get(answers))
        .route("/scenes", get(scenes))
        .route("/assets/{*path}", get(asset))
        .with_state(state)
}

pub struct ApiError(ReviewError);

impl From<ReviewError> for ApiError {
    fn from(e: ReviewError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code) = match &self.0 {
            ReviewError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            ReviewError::MissingAsset(_) => (StatusCode::NOT_FOUND, "missing_asset"),
            ReviewError::DuplicateVerdict { .. } => (StatusCode::CONFLICT, "duplicate_verdict"),
            ReviewError::DuplicateAnswer { .. } => (StatusCode::CONFLICT, "duplicate_answer"),
            ReviewError::Invariant(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_record"),
            ReviewError::Type(_) => (StatusCode::UNPROCESSABLE_ENTITY, "type_error"),
            ReviewError::BadFilter(_) => (StatusCode::BAD_REQUEST, "bad_filter"),
            ReviewError::Render(_) | ReviewError::Io(_) | ReviewError::Replay { .. } => {
                (StatusCode::INTERNAL_SERVER_ERROR, "internal")
            }
        };
        let mut body = json!({"error": code, "message": self.0.to_string()});
        if let ReviewError::MissingAsset(p) = &self.0 {
            body["path"] = Value::String(p.clone());
        }
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn bad_body(message: impl std::fmt::Display) -> ApiError {
    ApiError(ReviewError::Invariant(message.to_string()))
}

/// Parses a JSON body and fills `annotator_id` from the header when the body leaves it out.
fn with_annotator<T: for<'de> Deserialize<'de>>(
    headers: &HeaderMap,
    mut body: Value,
) -> ApiResult<T> {
    if let (Some(obj), Some(h)) = (body.as_object_mut(), headers.get(ANNOTATOR_HEADER)) {
        let h = h
            .to_str()
            .map_err(|_| bad_body("annotator header is not text"))?;
        match obj.get("annotator_id").and_then(Value::as_str) {
            Some(existing) if existing != h => {
                return Err(bad_body("annotator header and body disagree"))
            }
            Some(_) => {}
            None => {
                obj.insert("annotator_id".into(), Value::String(h.to_string()));
            }
        }
    }
    serde_json::from_value(body).map_err(bad_body)
}

fn ndjson<T: serde::Serialize>(rows: impl IntoIterator<Item = T>) -> Response {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(&r).expect("rows serialize"));
        out.push('\n');
    }
    ([(header::CONTENT_TYPE, "application/x-ndjson")], out).into_response()
}

async fn queue(
    State(s): State<Shared>,
    headers: HeaderMap,
    Query(mut q): Query<QueueQuery>,
) -> ApiResult<Response> {
    if q.annotator.is_none() {
        q.annotator = headers
            .get(ANNOTATOR_HEADER)
            .and_then(|h| h.to_str().ok())
            .map(str::to_string);
    }
    let page = s.store.read().await.queue(&q, s.config.page_size)?;
    Ok(Json(page).into_response())
}

async fn bundle(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let store = s.store.read().await;
    Ok(Json(store.bundle(&id, &s.config.asset_root)?))
}

async fn verdict(
    State(s): State<Shared>,
    headers: HeaderMap,
    Json(body): Json<Value>,
) -> ApiResult<Response> {
    let record: VerificationRecord = with_annotator(&headers, body)?;
    let mut store = s.store.write().await;
    store.submit_verdict(record.clone())?;
    let status = match &record.target {
        crate::store::Target::Qa { item_id } => json!(store.status(item_id)),
        crate::store::Target::Metadata { .. } => json!("human_verified"),
    };
    Ok((
        StatusCode::CREATED,
        Json(json!({"target": record.target, "status": status})),
    )
        .into_response())
}

async fn answer(
    State(s): State<Shared>,
    headers: HeaderMap,
    Json(body): Json<Value>,
) -> ApiResult<Response> {
    let a: HumanAnswer = with_annotator(&headers, body)?;
    let record = s.store.write().await.submit_answer(a)?;
    Ok((StatusCode::CREATED, Json(record)).into_response())
}

#[derive(Debug, Default, Deserialize)]
struct ExportQuery {
    task: Option<String>,
    ability: Option<String>,
    scene_id: Option<String>,
}

async fn export(State(s): State<Shared>, Query(q): Query<ExportQuery>) -> ApiResult<Response> {
    let items = s.store.read().await.export(
        q.task.as_deref(),
        q.ability.as_deref(),
        q.scene_id.as_deref(),
    )?;
    Ok(ndjson(items))
}

async fn stats(State(s): State<Shared>) -> Response {
    Json(s.store.read().await.stats()).into_response()
}

async fn answers(State(s): State<Shared>) -> Response {
    ndjson(s.store.read().await.predictions())
}

async fn scenes(State(s): State<Shared>) -> Response {
    let store = s.store.read().await;
    let mut out = String::new();
    for scene in store.scenes() {
        out.push_str(&sceneqa::schema::to_canonical_string(scene));
    }
    ([(header::CONTENT_TYPE, "application/x-ndjson")], out).into_response()
}

async fn asset(State(s): State<Shared>, Path(path): Path<String>) -> ApiResult<Response> {
    let rel = FsPath::new(&path);
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return Err(ApiError(ReviewError::NotFound(path)));
    }
    let full = s.config.asset_root.join(rel);
    let bytes = tokio::fs::read(&full)
        .await
        .map_err(|_| ApiError(ReviewError::MissingAsset(path.clone())))?;
    let mime = match full.extension().and_then(|e| e.to_str()) {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("json") => "application/json",
        _ => "application/octet-stream",
    };
    Ok(([(header::CONTENT_TYPE, mime)], Body::from(bytes)).into_response())
}
