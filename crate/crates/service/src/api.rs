//! HTTP routes. Every response is JSON; failures are
//! `{"error": code, "detail": message}`.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use autoeng::pipeline::{config_from_names, PipelineError};
use autoeng::search::Query as SearchQuery;
use autoeng::{CodeDocument, Level};

use crate::assistant::{
    complete_hardware, AssistantError, ComponentScore, Decision, Question, QuestionStatus,
    Recommendation, RecommendationStatus,
};
use crate::knowledge::Pattern;
use crate::store::{NewProject, Snapshot, Store, StoreError};

pub type AppState = Arc<Store>;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    detail: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, detail: impl Into<String>) -> Self {
        Self {
            status,
            code,
            detail: detail.into(),
        }
    }

    fn bad_request(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", detail)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.code, "detail": self.detail}))).into_response()
    }
}

impl From<AssistantError> for ApiError {
    fn from(e: AssistantError) -> Self {
        use AssistantError as E;
        let (status, code) = match &e {
            E::UnknownProject(_) => (StatusCode::NOT_FOUND, "unknown_project"),
            E::ProjectExists(_) => (StatusCode::CONFLICT, "project_exists"),
            E::UnknownRecommendation(_) => (StatusCode::NOT_FOUND, "unknown_recommendation"),
            E::AlreadyDecided(_) => (StatusCode::CONFLICT, "already_decided"),
            E::UnknownQuestion(_) => (StatusCode::NOT_FOUND, "unknown_question"),
            E::AlreadyAnswered(_) => (StatusCode::CONFLICT, "already_answered"),
            E::ModelsMissing(_) => (StatusCode::SERVICE_UNAVAILABLE, "models_missing"),
            E::Invalid(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            E::Model(p) => return p_error(p),
        };
        Self::new(status, code, e.to_string())
    }
}

fn p_error(e: &PipelineError) -> ApiError {
    match e {
        PipelineError::Config(_)
        | PipelineError::UnmappedComponents(_)
        | PipelineError::Search(_)
        | PipelineError::Feature(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_input", e.to_string()),
        _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "model_error", e.to_string()),
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        p_error(&e)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Assistant(a) => a.into(),
            StoreError::Journal(d) => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "journal", d),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::new(e.status(), "bad_request", e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs model-heavy work off the async executor.
async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> ApiResult<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

/// Routes, plus static files from `static_dir` for everything else.
pub fn router(store: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/projects", post(create_project).get(list_projects))
        .route("/projects/{id}", get(get_project))
        .route("/projects/{id}/analyze", post(analyze))
        .route("/projects/{id}/recommendations", get(list_recommendations))
        .route("/projects/{id}/recommendations/{rid}", post(decide))
        .route("/projects/{id}/questions", get(list_questions))
        .route("/projects/{id}/questions/{qid}", post(answer))
        .route("/classify", post(classify))
        .route("/search", post(search))
        .route("/hardware/complete", post(hardware_complete))
        .route("/knowledge", get(knowledge))
        .with_state(store);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route") }),
    }
}

async fn health(State(store): State<AppState>) -> Json<Value> {
    let m = store.models();
    Json(json!({
        "status": "ok",
        "models": {
            "classifier": m.classifier.is_some(),
            "embedding": m.embedding.is_some(),
            "hwrec": m.hwrec.as_ref().map(|h| h.kind().to_string()),
        }
    }))
}

#[derive(Debug, Serialize)]
struct HardwareView {
    level: Level,
    components: Vec<String>,
    slots: Vec<usize>,
}

#[derive(Debug, Serialize)]
struct ProjectView {
    project_id: String,
    revision: u64,
    documents: Vec<CodeDocument>,
    hardware: HardwareView,
    attributes: BTreeMap<String, String>,
}

fn project_view(store: &Store, snap: Snapshot) -> ProjectView {
    let s = snap.state;
    let tax = store.models().taxonomy(s.hardware.level);
    ProjectView {
        project_id: s.project_id,
        revision: s.revision,
        documents: s.documents,
        hardware: HardwareView {
            level: s.hardware.level,
            components: s.hardware.category_names(tax).into_iter().map(str::to_string).collect(),
            slots: s.hardware.present().collect(),
        },
        attributes: s.attributes,
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateProject {
    #[serde(default)]
    project_id: Option<String>,
    #[serde(default)]
    documents: Vec<CodeDocument>,
    /// Category or raw component names. Without it the documents' own
    /// component lists are mapped onto the taxonomy.
    #[serde(default)]
    hardware: Option<Vec<String>>,
    #[serde(default)]
    level: Option<Level>,
    #[serde(default)]
    attributes: BTreeMap<String, String>,
}

async fn create_project(
    State(store): State<AppState>,
    body: Result<Json<CreateProject>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<ProjectView>)> {
    let Json(req) = body?;
    let level = req.level.unwrap_or_else(|| store.models().default_level());
    let tax = store.models().taxonomy(level);
    let hardware = match &req.hardware {
        Some(names) => config_from_names(names, tax)?,
        None => {
            let raw: Vec<&str> = req
                .documents
                .iter()
                .flat_map(|d| d.raw_components.iter().map(String::as_str))
                .collect();
            let (config, unmapped) = autoeng::corpus::normalize_components(&raw, tax);
            if !unmapped.is_empty() {
                log::info!("ignoring unmapped components {unmapped:?}");
            }
            config
        }
    };
    let new = NewProject {
        project_id: req.project_id,
        documents: req.documents,
        hardware: Some(hardware),
        attributes: req.attributes,
    };
    let snap = store.create_project(new)?;
    Ok((StatusCode::CREATED, Json(project_view(&store, snap))))
}

async fn list_projects(State(store): State<AppState>) -> Json<Value> {
    Json(json!({"projects": store.project_ids()}))
}

async fn get_project(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<ProjectView>> {
    let snap = store.snapshot(&id)?;
    Ok(Json(project_view(&store, snap)))
}

#[derive(Debug, Serialize)]
struct AnalysisView {
    revision: u64,
    recommendations: Vec<Recommendation>,
    questions: Vec<Question>,
}

async fn analyze(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<AnalysisView>> {
    blocking(move || {
        let (recommendations, questions) = store.analyze(&id)?;
        let revision = store.snapshot(&id)?.state.revision;
        Ok(Json(AnalysisView {
            revision,
            recommendations,
            questions,
        }))
    })
    .await
}

#[derive(Debug, Deserialize)]
struct StatusFilter {
    status: Option<String>,
}

async fn list_recommendations(
    State(store): State<AppState>,
    Path(id): Path<String>,
    filter: Result<Query<StatusFilter>, QueryRejection>,
) -> ApiResult<Json<Value>> {
    let Query(filter) = filter?;
    let status: Option<RecommendationStatus> = filter
        .status
        .map(|s| s.parse())
        .transpose()
        .map_err(ApiError::bad_request)?;
    let recs: Vec<Recommendation> = store
        .snapshot(&id)?
        .recommendations
        .into_iter()
        .filter(|r| status.is_none_or(|s| r.status == s))
        .collect();
    Ok(Json(json!({"recommendations": recs})))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DecisionBody {
    decision: Decision,
    #[serde(default)]
    component: Option<String>,
}

async fn decide(
    State(store): State<AppState>,
    Path((id, rid)): Path<(String, String)>,
    body: Result<Json<DecisionBody>, JsonRejection>,
) -> ApiResult<Json<ProjectView>> {
    let Json(body) = body?;
    blocking(move || {
        let snap = store.decide(&id, &rid, body.decision, body.component.as_deref())?;
        Ok(Json(project_view(&store, snap)))
    })
    .await
}

async fn list_questions(
    State(store): State<AppState>,
    Path(id): Path<String>,
    filter: Result<Query<StatusFilter>, QueryRejection>,
) -> ApiResult<Json<Value>> {
    let Query(filter) = filter?;
    let status = match filter.status.as_deref() {
        None => None,
        Some("pending") => Some(QuestionStatus::Pending),
        Some("answered") => Some(QuestionStatus::Answered),
        Some(other) => return Err(ApiError::bad_request(format!("unknown status {other:?} (pending, answered)"))),
    };
    let questions: Vec<Question> = store
        .snapshot(&id)?
        .questions
        .into_iter()
        .filter(|q| status.is_none_or(|s| q.status == s))
        .collect();
    Ok(Json(json!({"questions": questions})))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerBody {
    value: String,
}

async fn answer(
    State(store): State<AppState>,
    Path((id, qid)): Path<(String, String)>,
    body: Result<Json<AnswerBody>, JsonRejection>,
) -> ApiResult<Json<ProjectView>> {
    let Json(body) = body?;
    blocking(move || {
        let snap = store.answer(&id, &qid, &body.value)?;
        Ok(Json(project_view(&store, snap)))
    })
    .await
}

/// Either raw feature tokens or a whole document.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassifyBody {
    #[serde(default)]
    tokens: Option<Vec<String>>,
    #[serde(default)]
    document: Option<CodeDocument>,
}

async fn classify(
    State(store): State<AppState>,
    body: Result<Json<ClassifyBody>, JsonRejection>,
) -> ApiResult<Json<Value>> {
    let Json(body) = body?;
    blocking(move || {
        let model = store
            .models()
            .classifier
            .as_ref()
            .ok_or(AssistantError::ModelsMissing(vec!["classifier"]))?;
        let prediction = match (body.tokens, body.document) {
            (Some(tokens), None) => model.predict_tokens("query", &tokens)?,
            (None, Some(doc)) => model.predict_document(&doc)?,
            _ => return Err(ApiError::bad_request("give exactly one of tokens or document")),
        };
        Ok(Json(serde_json::to_value(prediction).expect("prediction serializes")))
    })
    .await
}

fn default_k() -> usize {
    5
}

/// One of an indexed document id, a document, or feature tokens.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SearchBody {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    document: Option<CodeDocument>,
    #[serde(default)]
    tokens: Option<Vec<String>>,
    #[serde(default = "default_k")]
    k: usize,
}

async fn search(State(store): State<AppState>, body: Result<Json<SearchBody>, JsonRejection>) -> ApiResult<Json<Value>> {
    let Json(body) = body?;
    blocking(move || {
        let emb = store
            .models()
            .embedding
            .as_ref()
            .ok_or(AssistantError::ModelsMissing(vec!["embedding"]))?;
        let neighbors = match (body.id, body.document, body.tokens) {
            (Some(id), None, None) => emb.index.query_knn(SearchQuery::Id(&id), body.k).map_err(PipelineError::from)?,
            (None, Some(doc), None) => emb.search_document(&doc, body.k)?,
            (None, None, Some(tokens)) => emb.search_tokens(&tokens, body.k)?,
            _ => return Err(ApiError::bad_request("give exactly one of id, document or tokens")),
        };
        Ok(Json(json!({"neighbors": neighbors})))
    })
    .await
}

fn default_hw_k() -> usize {
    3
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompleteBody {
    present: Vec<String>,
    #[serde(default = "default_hw_k")]
    k: usize,
}

async fn hardware_complete(
    State(store): State<AppState>,
    body: Result<Json<CompleteBody>, JsonRejection>,
) -> ApiResult<Json<Value>> {
    let Json(body) = body?;
    blocking(move || {
        let model = store
            .models()
            .hwrec
            .as_ref()
            .ok_or(AssistantError::ModelsMissing(vec!["hwrec"]))?;
        let level = store.models().default_level();
        let tax = store.models().taxonomy(level);
        let partial = config_from_names(&body.present, tax)?;
        let components: Vec<ComponentScore> = complete_hardware(model, &partial, body.k)?
            .into_iter()
            .map(|(slot, score)| ComponentScore {
                category: tax.categories()[slot].clone(),
                slot,
                score,
            })
            .collect();
        Ok(Json(json!({"components": components})))
    })
    .await
}

#[derive(Debug, Deserialize)]
struct TriplePattern {
    s: Option<String>,
    p: Option<String>,
    o: Option<String>,
}

async fn knowledge(
    State(store): State<AppState>,
    q: Result<Query<TriplePattern>, QueryRejection>,
) -> ApiResult<Json<Value>> {
    let Query(q) = q?;
    // empty parameters are wildcards too
    let part = |x: &Option<String>| x.as_deref().filter(|v| !v.is_empty()).map(str::to_string);
    let (s, p, o) = (part(&q.s), part(&q.p), part(&q.o));
    let triples = store.knowledge(&Pattern {
        subject: s.as_deref(),
        predicate: p.as_deref(),
        object: o.as_deref(),
    });
    Ok(Json(json!({"triples": triples})))
}
