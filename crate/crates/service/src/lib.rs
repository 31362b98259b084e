//! HTTP API over a corpus of marked-up translations.
//!
//! | method | path | body / query | success |
//! |---|---|---|---|
//! | GET | `/api/taxonomy` | | taxonomy |
//! | GET | `/api/documents` | | list of document metadata |
//! | GET | `/api/documents/{id}` | | [`DocumentView`] |
//! | POST | `/api/documents/{id}/annotations` | [`NewAnnotation`] | 201 [`AnnotationCreated`] |
//! | DELETE | `/api/documents/{id}/annotations/{aid}` | `?base_version=` | [`VersionBody`] |
//! | GET | `/api/documents/{id}/score` | `?scale=&mode=` | score report |
//! | GET | `/api/documents/{id}/render` | `?representation=` | [`RenderView`] |
//! | GET | `/api/stylesheet.css` | | default stylesheet |
//!
//! Errors are `{"status", "code", "message"}` ([`ApiError`]).
//!
//! Every mutation carries the version the client last saw. Writes go through
//! one lock, and the version check happens while it is held, so of two
//! requests made against the same version exactly one succeeds.

use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::RwLock;
use tower_http::services::ServeDir;
use tqamark_core::{
    default_stylesheet, render, report_json, score, Annotation, AnnotationError, AssessmentConfig, Corpus,
    CorpusError, DocumentMeta, MarkedDocument, OutputMode, RenderError, RoundingMode, ScoreError, Severity,
    Span, Taxonomy,
};

pub const STYLESHEET_PATH: &str = "/api/stylesheet.css";
pub const DEFAULT_REPRESENTATION: &str = "severity-highlight";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub status: u16,
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status: status.as_u16(),
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BadRequest", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NotFound", message)
    }

    pub fn version_conflict(doc_id: &str, stored: u64, base: u64) -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "VersionConflict",
            format!("document `{doc_id}` is at version {stored}, request was based on {base}"),
        )
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

impl From<AnnotationError> for ApiError {
    fn from(e: AnnotationError) -> Self {
        let status = match e {
            AnnotationError::UnknownAnnotation(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<CorpusError> for ApiError {
    fn from(e: CorpusError) -> Self {
        match &e {
            CorpusError::NotFound(_) => ApiError::not_found(e.to_string()),
            CorpusError::StaleVersion { .. } => ApiError::new(StatusCode::CONFLICT, "VersionConflict", e.to_string()),
            CorpusError::InvalidDocument(_)
            | CorpusError::InvalidDocId(_)
            | CorpusError::DocumentExists(_)
            | CorpusError::UnknownCategoryInQuery(_)
            | CorpusError::MalformedSegmentFile(_)
            | CorpusError::MissingVariant { .. } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.code(), e.to_string())
            }
            CorpusError::EmptyQuery => ApiError::new(StatusCode::BAD_REQUEST, e.code(), e.to_string()),
            CorpusError::PathOccupied(_)
            | CorpusError::Io { .. }
            | CorpusError::Corrupt { .. }
            | CorpusError::Unparsable { .. } => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.code(), e.to_string())
            }
        }
    }
}

impl From<ScoreError> for ApiError {
    fn from(e: ScoreError) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.code(), e.to_string())
    }
}

impl From<RenderError> for ApiError {
    fn from(e: RenderError) -> Self {
        match e {
            RenderError::InvalidDocument(_) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidDocument", e.to_string())
            }
            RenderError::UnknownRepresentationFields(_) => {
                ApiError::new(StatusCode::BAD_REQUEST, "UnknownRepresentationFields", e.to_string())
            }
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// A stored document as the API returns it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentView {
    pub doc_id: String,
    pub version: u64,
    pub meta: DocumentMeta,
    #[serde(default)]
    pub source_text: Option<String>,
    pub plain_text: String,
    pub annotations: Vec<Annotation>,
}

impl From<MarkedDocument> for DocumentView {
    fn from(doc: MarkedDocument) -> Self {
        DocumentView {
            doc_id: doc.meta.doc_id.clone(),
            version: doc.meta.version,
            source_text: doc.source_text,
            plain_text: doc.plain_text,
            annotations: doc.annotations,
            meta: doc.meta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewAnnotation {
    pub category_id: String,
    pub severity: Severity,
    pub span: Span,
    #[serde(default)]
    pub note: Option<String>,
    pub base_version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationCreated {
    pub annotation: Annotation,
    pub version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionBody {
    pub version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderView {
    pub doc_id: String,
    pub representation: String,
    pub html: String,
    pub stylesheet: String,
}

#[derive(Debug, Deserialize)]
struct BaseVersion {
    base_version: u64,
}

#[derive(Debug, Deserialize)]
struct ScoreParams {
    scale: Option<String>,
    mode: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RenderParams {
    representation: Option<String>,
}

pub struct AppState {
    corpus: RwLock<Corpus>,
    config: AssessmentConfig,
    ui_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(corpus: Corpus, config: AssessmentConfig) -> Self {
        AppState {
            corpus: RwLock::new(corpus),
            config,
            ui_dir: None,
        }
    }

    /// Serve the built UI from `dir` at `/`.
    pub fn with_ui_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.ui_dir = Some(dir.into());
        self
    }

    pub fn config(&self) -> &AssessmentConfig {
        &self.config
    }
}

type Shared = Arc<AppState>;

pub fn router(state: AppState) -> Router {
    let ui_dir = state.ui_dir.clone();
    let api = Router::new()
        .route("/api/taxonomy", get(get_taxonomy))
        .route("/api/documents", get(list_documents))
        .route("/api/documents/{id}", get(get_document))
        .route("/api/documents/{id}/annotations", post(add_annotation))
        .route("/api/documents/{id}/annotations/{aid}", delete(delete_annotation))
        .route("/api/documents/{id}/score", get(score_document))
        .route("/api/documents/{id}/render", get(render_document))
        .route(STYLESHEET_PATH, get(stylesheet))
        .fallback(api_fallback)
        .with_state(Arc::new(state));
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(placeholder_page)),
    }
}

async fn api_fallback() -> ApiError {
    ApiError::not_found("no such endpoint")
}

async fn placeholder_page() -> Html<&'static str> {
    Html(
        "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>tqamark</title>\
         <link rel=\"stylesheet\" href=\"/api/stylesheet.css\"></head>\
         <body><h1>tqamark</h1><p>The annotation UI is not installed. \
         The API is available under <code>/api/</code>.</p></body></html>\n",
    )
}

async fn get_taxonomy(State(s): State<Shared>) -> Json<Taxonomy> {
    Json(s.corpus.read().await.taxonomy().clone())
}

async fn list_documents(State(s): State<Shared>) -> Json<Vec<DocumentMeta>> {
    let corpus = s.corpus.read().await;
    Json(corpus.entries().map(|(_, e)| e.meta.clone()).collect())
}

async fn get_document(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<DocumentView>> {
    let doc = s.corpus.read().await.get_document(&id)?;
    Ok(Json(doc.into()))
}

fn check_version(corpus: &Corpus, doc_id: &str, base: u64) -> ApiResult<()> {
    let stored = corpus
        .stored_version(doc_id)
        .ok_or_else(|| ApiError::not_found(format!("no document `{doc_id}`")))?;
    if stored != base {
        return Err(ApiError::version_conflict(doc_id, stored, base));
    }
    Ok(())
}

async fn add_annotation(
    State(s): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<NewAnnotation>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<AnnotationCreated>)> {
    let Json(req) = body?;
    let mut corpus = s.corpus.write().await;
    check_version(&corpus, &id, req.base_version)?;
    let doc = corpus.get_document(&id)?;
    let taxonomy = corpus.taxonomy().clone();
    let (doc, annotation) = doc.add_annotation(&taxonomy, &req.category_id, req.severity, req.span, req.note)?;
    corpus.put_document(&doc)?;
    Ok((
        StatusCode::CREATED,
        Json(AnnotationCreated {
            annotation,
            version: doc.meta.version,
        }),
    ))
}

async fn delete_annotation(
    State(s): State<Shared>,
    Path((id, aid)): Path<(String, String)>,
    query: Result<Query<BaseVersion>, QueryRejection>,
) -> ApiResult<Json<VersionBody>> {
    let Query(q) = query?;
    let mut corpus = s.corpus.write().await;
    let doc = corpus.get_document(&id)?;
    if doc.annotation(&aid).is_none() {
        return Err(AnnotationError::UnknownAnnotation(aid).into());
    }
    check_version(&corpus, &id, q.base_version)?;
    let doc = doc.remove_annotation(&aid)?;
    corpus.put_document(&doc)?;
    Ok(Json(VersionBody {
        version: doc.meta.version,
    }))
}

async fn score_document(
    State(s): State<Shared>,
    Path(id): Path<String>,
    query: Result<Query<ScoreParams>, QueryRejection>,
) -> ApiResult<Response> {
    let Query(q) = query?;
    let config = &s.config;
    let scale_name = q.scale.as_deref().unwrap_or(&config.default_scale);
    let scale = config
        .scale(scale_name)
        .ok_or_else(|| ApiError::bad_request(format!("unknown scale `{scale_name}`")))?;
    let mode = match q.mode.as_deref() {
        None => config.rounding_mode,
        Some(m) => m.parse::<RoundingMode>().map_err(|e| ApiError::bad_request(e.to_string()))?,
    };
    let corpus = s.corpus.read().await;
    let doc = corpus.get_document(&id)?;
    let report = score(&doc, corpus.taxonomy(), &config.weights, scale, mode)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], report_json(&report)).into_response())
}

async fn render_document(
    State(s): State<Shared>,
    Path(id): Path<String>,
    query: Result<Query<RenderParams>, QueryRejection>,
) -> ApiResult<Json<RenderView>> {
    let Query(q) = query?;
    let name = q.representation.as_deref().unwrap_or(DEFAULT_REPRESENTATION);
    let repr = s
        .config
        .representation(name)
        .ok_or_else(|| ApiError::bad_request(format!("unknown representation `{name}`")))?
        .with_mode(OutputMode::Html);
    let corpus = s.corpus.read().await;
    let doc = corpus.get_document(&id)?;
    let html = render(&doc, corpus.taxonomy(), &repr)?;
    Ok(Json(RenderView {
        doc_id: id,
        representation: name.to_string(),
        html,
        stylesheet: STYLESHEET_PATH.to_string(),
    }))
}

async fn stylesheet() -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "text/css; charset=utf-8")], default_stylesheet())
}

/// Binds the listening socket. Fails when the address is in use.
pub async fn bind(addr: SocketAddr) -> io::Result<TcpListener> {
    TcpListener::bind(addr).await
}

pub async fn serve(listener: TcpListener, state: AppState) -> io::Result<()> {
    axum::serve(listener, router(state)).await
}
