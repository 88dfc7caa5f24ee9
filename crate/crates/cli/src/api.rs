//! HTTP+JSON service over models and running cases.
//!
//! Models are kept in memory, keyed by file stem for models loaded from the
//! model directory and by a model-hash prefix for uploads. Steps on one
//! case are serialized by a per-case lock.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use fcm_core::compiler::export_dot;
use fcm_core::cpn::ObjectId;
use fcm_core::engine::{
    apply_step, create_case, enabled_steps, restore, snapshot, terminable, AttributeInput,
    CaseDefinition, CaseState, CaseStatus, EngineError, ObjectRecord, Snapshot,
};
use fcm_core::model::{parse_case_model, validate_all, Violation};

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, error: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: json!({ "error": error, "message": message.into() }),
        }
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NotFound", format!("unknown {what} {id}"))
    }

    fn violations(v: &[Violation]) -> Self {
        ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            body: json!({
                "error": "Validation",
                "message": format!("{} violations", v.len()),
                "violations": v,
            }),
        }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let (status, code) = match &e {
            EngineError::StaleOption(_) => (StatusCode::CONFLICT, "StaleOption"),
            EngineError::CaseTerminated => (StatusCode::CONFLICT, "CaseTerminated"),
            EngineError::VersionMismatch { .. } => (StatusCode::CONFLICT, "VersionMismatch"),
            EngineError::Schema(_) => (StatusCode::UNPROCESSABLE_ENTITY, "Schema"),
            EngineError::Snapshot(_) => (StatusCode::UNPROCESSABLE_ENTITY, "Snapshot"),
            EngineError::Compile(_) => (StatusCode::UNPROCESSABLE_ENTITY, "Compile"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

struct CaseEntry {
    model_id: String,
    state: CaseState,
}

#[derive(Default)]
pub struct AppState {
    models: RwLock<BTreeMap<String, Arc<CaseDefinition>>>,
    cases: RwLock<BTreeMap<String, Arc<Mutex<CaseEntry>>>>,
}

impl AppState {
    /// Adds a validated model under `id`.
    pub fn add_model(&self, id: &str, text: &str) -> Result<(), ApiError> {
        let def = definition(text)?;
        self.models.write().unwrap().insert(id.to_string(), Arc::new(def));
        Ok(())
    }

    /// Loads every `*.json` model of `dir`. Returns the files that were
    /// skipped together with the reason.
    pub fn load_dir(&self, dir: &Path) -> std::io::Result<Vec<(String, String)>> {
        let mut paths: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut skipped = Vec::new();
        for p in paths {
            let id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let text = std::fs::read_to_string(&p)?;
            if let Err(e) = self.add_model(&id, &text) {
                skipped.push((p.display().to_string(), e.body["message"].to_string()));
            }
        }
        Ok(skipped)
    }

    fn model(&self, id: &str) -> ApiResult<Arc<CaseDefinition>> {
        self.models
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("model", id))
    }

    fn case(&self, id: &str) -> ApiResult<Arc<Mutex<CaseEntry>>> {
        self.cases
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("case", id))
    }
}

/// Parses, validates and compiles a model document.
fn definition(text: &str) -> ApiResult<CaseDefinition> {
    let m = parse_case_model(text)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "Parse", e.to_string()))?;
    let v = validate_all(&m);
    if !v.is_empty() {
        return Err(ApiError::violations(&v));
    }
    CaseDefinition::new(&m)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "Compile", e.to_string()))
}

pub type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/models", get(list_models).post(upload_model))
        .route("/models/{id}/net.dot", get(net_dot))
        .route("/cases", axum::routing::post(new_case))
        .route("/cases/{id}", get(case_view))
        .route("/cases/{id}/steps", get(list_steps).post(post_step))
        .route("/cases/{id}/terminable", get(get_terminable))
        .route("/cases/{id}/snapshot", get(get_snapshot).put(put_snapshot))
        .with_state(state)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelSummary {
    pub model_id: String,
    pub model_hash: String,
    pub classes: usize,
    pub fragments: usize,
    pub places: usize,
    pub transitions: usize,
}

async fn list_models(State(s): State<Shared>) -> Json<Vec<ModelSummary>> {
    let models = s.models.read().unwrap();
    Json(
        models
            .iter()
            .map(|(id, d)| ModelSummary {
                model_id: id.clone(),
                model_hash: d.model_hash.clone(),
                classes: d.model.classes.len(),
                fragments: d.model.fragments.len(),
                places: d.net.places.len(),
                transitions: d.net.transitions.len(),
            })
            .collect(),
    )
}

/// Uploads a model document; its id is a prefix of its content hash.
async fn upload_model(State(s): State<Shared>, body: String) -> ApiResult<(StatusCode, Json<Value>)> {
    let def = definition(&body)?;
    let id = def.model_hash[..12].to_string();
    s.models.write().unwrap().insert(id.clone(), Arc::new(def));
    Ok((StatusCode::CREATED, Json(json!({ "modelId": id, "violations": [] }))))
}

async fn net_dot(State(s): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let def = s.model(&id)?;
    Ok(([(header::CONTENT_TYPE, "text/vnd.graphviz")], export_dot(&def.net)).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct NewCase {
    model_id: String,
}

async fn new_case(State(s): State<Shared>, Json(req): Json<NewCase>) -> ApiResult<(StatusCode, Json<Value>)> {
    let def = s.model(&req.model_id)?;
    let cs = create_case(&def);
    let id = cs.case_id.clone();
    let entry = CaseEntry {
        model_id: req.model_id,
        state: cs,
    };
    s.cases.write().unwrap().insert(id.clone(), Arc::new(Mutex::new(entry)));
    Ok((StatusCode::CREATED, Json(json!({ "caseId": id }))))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CaseView {
    pub case_id: String,
    pub model_id: String,
    pub status: CaseStatus,
    pub objects: Vec<ObjectRecord>,
    pub associations: Vec<(ObjectId, ObjectId)>,
    pub steps_taken: usize,
}

fn view(def: &CaseDefinition, e: &CaseEntry) -> CaseView {
    CaseView {
        case_id: e.state.case_id.clone(),
        model_id: e.model_id.clone(),
        status: e.state.status,
        objects: e.state.objects.values().cloned().collect(),
        associations: e.state.associations(&def.net),
        steps_taken: e.state.log.len(),
    }
}

/// The case entry and its model definition.
fn lookup(s: &AppState, id: &str) -> ApiResult<(Arc<Mutex<CaseEntry>>, Arc<CaseDefinition>)> {
    let entry = s.case(id)?;
    let model_id = entry.lock().unwrap().model_id.clone();
    Ok((entry, s.model(&model_id)?))
}

async fn case_view(State(s): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<CaseView>> {
    let (entry, def) = lookup(&s, &id)?;
    let e = entry.lock().unwrap();
    Ok(Json(view(&def, &e)))
}

async fn list_steps(State(s): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let (entry, def) = lookup(&s, &id)?;
    let e = entry.lock().unwrap();
    if e.state.status == CaseStatus::Terminated {
        return Ok(Json(json!([])));
    }
    Ok(Json(serde_json::to_value(enabled_steps(&def, &e.state)?).expect("options serialize")))
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct StepRequest {
    option_id: String,
    #[serde(default)]
    attributes: AttributeInput,
}

async fn post_step(
    State(s): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<StepRequest>,
) -> ApiResult<Json<CaseView>> {
    let (entry, def) = lookup(&s, &id)?;
    let mut e = entry.lock().unwrap();
    e.state = apply_step(&def, &e.state, &req.option_id, &req.attributes)?;
    Ok(Json(view(&def, &e)))
}

async fn get_terminable(State(s): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let (entry, def) = lookup(&s, &id)?;
    let e = entry.lock().unwrap();
    Ok(Json(json!({ "terminable": terminable(&def, &e.state) })))
}

async fn get_snapshot(State(s): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Snapshot>> {
    let (entry, def) = lookup(&s, &id)?;
    let e = entry.lock().unwrap();
    Ok(Json(snapshot(&def, &e.state)))
}

async fn put_snapshot(
    State(s): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Json(doc): Json<Snapshot>,
) -> ApiResult<Json<CaseView>> {
    let (entry, def) = lookup(&s, &id)?;
    if doc.case_id != id {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "Snapshot",
            format!("snapshot of case {} sent to case {id}", doc.case_id),
        ));
    }
    let restored = restore(&def, &doc)?;
    let mut e = entry.lock().unwrap();
    e.state = restored;
    Ok(Json(view(&def, &e)))
}
