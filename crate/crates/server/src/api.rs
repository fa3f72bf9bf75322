//! HTTP+JSON endpoints.
//!
//! Callers identify themselves with an `X-User-Id` header, required on
//! every mutating request and on the history view. Errors always have the
//! shape `{"error": {"code": "...", "message": "..."}}`; malformed input is
//! 400, unknown ids are 404.
//!
//! `GET /workspaces/{id}/history` is the one read that logs an event
//! (`history_viewed`).

use std::collections::{BTreeMap, BTreeSet};

use axum::extract::rejection::QueryRejection;
use axum::extract::{FromRequest, FromRequestParts, Path, Request, State};
use axum::http::request::Parts;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use collab_ir_core::repository::{DocumentNotes, History, Recommendation, RepoError, SearchHit, WorkspaceState};
use collab_ir_core::session::SessionError;
use collab_ir_core::{
    AnnotationKind, AnnotationRecord, DocumentId, DocumentRecord, EntityRef, Indicator, IndicatorReport,
    InformationSource, ProblemDefinition, ProblemId, ProblemPatch, UserId, WorkspaceId,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::Service;

pub const USER_HEADER: &str = "x-user-id";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self { status, code: code.to_string(), message: message.into() }
    }

    pub fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn not_found(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

impl From<RepoError> for ApiError {
    fn from(e: RepoError) -> Self {
        let status = match &e {
            e if e.is_not_found() => StatusCode::NOT_FOUND,
            RepoError::Knowledge(_) => StatusCode::BAD_REQUEST,
            RepoError::WorkspaceExists(_) => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.code(), e.to_string())
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Repo(r) => r.into(),
            other => Self::bad_request(other.code(), other.to_string()),
        }
    }
}

/// The acting user, from the `X-User-Id` header.
#[derive(Debug, Clone)]
pub struct Caller(pub UserId);

impl<S: Send + Sync> FromRequestParts<S> for Caller {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, _: &S) -> Result<Self, Self::Rejection> {
        let raw = parts
            .headers
            .get(USER_HEADER)
            .ok_or_else(|| ApiError::bad_request("missing_user", "X-User-Id header is required"))?;
        let text = raw.to_str().map_err(|_| ApiError::bad_request("invalid_user", "X-User-Id is not text"))?;
        text.parse()
            .map(Caller)
            .map_err(|e: collab_ir_core::KnowledgeError| ApiError::bad_request("invalid_user", e.to_string()))
    }
}

/// JSON body whose parse failures become 400 `invalid_body`.
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(e) => Err(ApiError::bad_request("invalid_body", e.body_text())),
        }
    }
}

/// Query string whose parse failures become 400 `invalid_query`.
pub struct Params<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequestParts<S> for Params<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        axum::extract::Query::<T>::from_request_parts(parts, state)
            .await
            .map(|q| Params(q.0))
            .map_err(|e: QueryRejection| ApiError::bad_request("invalid_query", e.body_text()))
    }
}

fn workspace_id(raw: &str) -> Result<WorkspaceId, ApiError> {
    raw.parse().map_err(|_| ApiError::not_found("unknown_workspace", format!("unknown workspace `{raw}`")))
}

fn problem_id(raw: &str) -> Result<ProblemId, ApiError> {
    raw.parse().map_err(|_| ApiError::not_found("unknown_problem", format!("unknown problem `{raw}`")))
}

fn document_id(raw: &str) -> Result<DocumentId, ApiError> {
    raw.parse().map_err(|_| ApiError::not_found("unknown_document", format!("unknown document `{raw}`")))
}

#[derive(Debug, Deserialize)]
pub struct CreateWorkspace {
    pub id: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WorkspaceView {
    /// Users connected right now.
    pub members: BTreeSet<UserId>,
    #[serde(flatten)]
    pub state: WorkspaceState,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct CreateProblem {
    pub statement: String,
    pub objective: String,
    pub domains: Vec<String>,
    pub keywords: Vec<String>,
    pub sources: Vec<InformationSource>,
    pub indicators: Vec<Indicator>,
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProblemResponse {
    pub id: ProblemId,
    pub seq: u64,
    pub problem: ProblemDefinition,
}

#[derive(Debug, Deserialize)]
pub struct CreateSubProblem {
    pub statement: String,
}

#[derive(Debug, Deserialize)]
pub struct CreateAnnotation {
    pub target: EntityRef,
    pub body: String,
    pub kind: AnnotationKind,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnnotationResponse {
    pub seq: u64,
    pub annotation: AnnotationRecord,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SeqResponse {
    pub seq: u64,
}

#[derive(Debug, Deserialize)]
pub struct TagBody {
    pub tag: String,
}

#[derive(Debug, Deserialize)]
pub struct MetadataBody {
    pub key: String,
    #[serde(default)]
    pub value: String,
}

#[derive(Debug, Deserialize)]
pub struct ClassBody {
    pub class: String,
}

#[derive(Debug, Deserialize)]
pub struct SearchParams {
    #[serde(default)]
    pub q: String,
    pub limit: Option<usize>,
}

#[derive(Debug, Deserialize)]
pub struct CollaboratorParams {
    pub k: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct HistoryResponse {
    pub seq: u64,
    #[serde(flatten)]
    pub history: History,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DocumentView {
    pub workspace: WorkspaceId,
    pub document: DocumentRecord,
    pub notes: DocumentNotes,
}

pub const DEFAULT_SEARCH_LIMIT: usize = 10;
pub const DEFAULT_COLLABORATORS: usize = 5;
const MAX_PAGE: usize = 1000;

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn create_workspace(
    State(svc): State<Service>,
    Body(body): Body<CreateWorkspace>,
) -> Result<(StatusCode, Json<serde_json::Value>), ApiError> {
    let id: WorkspaceId = body
        .id
        .parse()
        .map_err(|e: collab_ir_core::KnowledgeError| ApiError::bad_request("invalid_identifier", e.to_string()))?;
    svc.repo.create_workspace(&id)?;
    Ok((StatusCode::CREATED, Json(json!({ "id": id }))))
}

async fn get_workspace(State(svc): State<Service>, Path(raw): Path<String>) -> Result<Json<WorkspaceView>, ApiError> {
    let id = workspace_id(&raw)?;
    let state = svc.repo.snapshot(&id)?;
    Ok(Json(WorkspaceView { members: svc.engine.members(&id), state: (*state).clone() }))
}

async fn create_problem(
    State(svc): State<Service>,
    Path(raw): Path<String>,
    Caller(user): Caller,
    Body(body): Body<CreateProblem>,
) -> Result<(StatusCode, Json<ProblemResponse>), ApiError> {
    let ws = workspace_id(&raw)?;
    let initial = ProblemPatch {
        add_domains: body.domains,
        add_keywords: body.keywords,
        add_sources: body.sources,
        add_indicators: body.indicators,
        set_attributes: body.attributes,
        ..Default::default()
    };
    let (problem, event) = svc.repo.create_problem(&ws, &body.statement, &body.objective, &user, &initial)?;
    Ok((StatusCode::CREATED, Json(ProblemResponse { id: problem.id, seq: event.seq, problem })))
}

async fn get_problem(State(svc): State<Service>, Path(raw): Path<String>) -> Result<Json<serde_json::Value>, ApiError> {
    let (workspace, problem) = svc.repo.problem(&problem_id(&raw)?)?;
    Ok(Json(json!({ "workspace": workspace, "problem": problem })))
}

async fn revise_problem(
    State(svc): State<Service>,
    Path(raw): Path<String>,
    Caller(user): Caller,
    Body(patch): Body<ProblemPatch>,
) -> Result<Json<ProblemResponse>, ApiError> {
    let (problem, event) = svc.repo.revise_problem(&problem_id(&raw)?, &patch, &user)?;
    Ok(Json(ProblemResponse { id: problem.id, seq: event.seq, problem }))
}

async fn add_sub_problem(
    State(svc): State<Service>,
    Path(raw): Path<String>,
    Caller(user): Caller,
    Body(body): Body<CreateSubProblem>,
) -> Result<(StatusCode, Json<ProblemResponse>), ApiError> {
    let (problem, event) = svc.repo.add_sub_problem(&problem_id(&raw)?, &body.statement, &user)?;
    Ok((StatusCode::CREATED, Json(ProblemResponse { id: problem.id, seq: event.seq, problem })))
}

async fn annotate(
    State(svc): State<Service>,
    Caller(user): Caller,
    Body(body): Body<CreateAnnotation>,
) -> Result<(StatusCode, Json<AnnotationResponse>), ApiError> {
    let (annotation, event) = svc.repo.annotate(body.target, &body.body, body.kind, &user)?;
    Ok((StatusCode::CREATED, Json(AnnotationResponse { seq: event.seq, annotation })))
}

async fn reports(State(svc): State<Service>, Path(raw): Path<String>) -> Result<Json<Vec<IndicatorReport>>, ApiError> {
    Ok(Json(svc.repo.reports_for_problem(&problem_id(&raw)?)?))
}

async fn search(State(svc): State<Service>, Params(p): Params<SearchParams>) -> Json<Vec<SearchHit>> {
    let limit = p.limit.unwrap_or(DEFAULT_SEARCH_LIMIT).min(MAX_PAGE);
    Json(svc.repo.search(&p.q, limit))
}

async fn collaborators(
    State(svc): State<Service>,
    Path(raw): Path<String>,
    Params(p): Params<CollaboratorParams>,
) -> Result<Json<Vec<Recommendation>>, ApiError> {
    let k = p.k.unwrap_or(DEFAULT_COLLABORATORS).min(MAX_PAGE);
    Ok(Json(svc.repo.recommend_collaborators(&problem_id(&raw)?, k, svc.engine.as_ref())?))
}

async fn history(
    State(svc): State<Service>,
    Path(raw): Path<String>,
    Caller(user): Caller,
) -> Result<Json<HistoryResponse>, ApiError> {
    let (history, event) = svc.repo.view_history(&workspace_id(&raw)?, &user)?;
    Ok(Json(HistoryResponse { seq: event.seq, history }))
}

async fn get_document(State(svc): State<Service>, Path(raw): Path<String>) -> Result<Json<DocumentView>, ApiError> {
    let id = document_id(&raw)?;
    let (workspace, document) = svc.repo.document(&id)?;
    let notes = svc.repo.snapshot(&workspace)?.document_notes.get(&id).cloned().unwrap_or_default();
    Ok(Json(DocumentView { workspace, document, notes }))
}

async fn tag_document(
    State(svc): State<Service>,
    Path(raw): Path<String>,
    Caller(user): Caller,
    Body(body): Body<TagBody>,
) -> Result<(StatusCode, Json<SeqResponse>), ApiError> {
    let event = svc.repo.tag_document(&document_id(&raw)?, &body.tag, &user)?;
    Ok((StatusCode::CREATED, Json(SeqResponse { seq: event.seq })))
}

async fn add_metadata(
    State(svc): State<Service>,
    Path(raw): Path<String>,
    Caller(user): Caller,
    Body(body): Body<MetadataBody>,
) -> Result<(StatusCode, Json<SeqResponse>), ApiError> {
    let event = svc.repo.add_metadata(&document_id(&raw)?, &body.key, &body.value, &user)?;
    Ok((StatusCode::CREATED, Json(SeqResponse { seq: event.seq })))
}

async fn classify_document(
    State(svc): State<Service>,
    Path(raw): Path<String>,
    Caller(user): Caller,
    Body(body): Body<ClassBody>,
) -> Result<(StatusCode, Json<SeqResponse>), ApiError> {
    let event = svc.repo.classify_document(&document_id(&raw)?, &body.class, &user)?;
    Ok((StatusCode::CREATED, Json(SeqResponse { seq: event.seq })))
}

async fn fallback() -> ApiError {
    ApiError::not_found("not_found", "no such endpoint")
}

pub fn router(service: Service) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/workspaces", post(create_workspace))
        .route("/workspaces/{id}", get(get_workspace))
        .route("/workspaces/{id}/problems", post(create_problem))
        .route("/workspaces/{id}/history", get(history))
        .route("/problems/{id}", get(get_problem).merge(patch(revise_problem)))
        .route("/problems/{id}/subproblems", post(add_sub_problem))
        .route("/problems/{id}/reports", get(reports))
        .route("/problems/{id}/collaborators", get(collaborators))
        .route("/annotations", post(annotate))
        .route("/documents/{id}", get(get_document))
        .route("/documents/{id}/tags", post(tag_document))
        .route("/documents/{id}/metadata", post(add_metadata))
        .route("/documents/{id}/classes", post(classify_document))
        .route("/search", get(search))
        .route("/ws/{workspace}", get(crate::ws::upgrade))
        .fallback(fallback)
        .with_state(service)
}
