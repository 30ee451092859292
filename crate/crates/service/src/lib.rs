//! HTTP facade over a loaded skill graph.
//!
//! Routes:
//! - `POST /api/query` ranks skills for an environment plus a task vector or sketch.
//! - `POST /api/compose` starts a background composition job for a query.
//! - `GET /api/compose/{id}` polls a job.
//! - `GET /api/skills` lists the skills of the loaded model.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use rsg_core::catalog::{EnvInstance, SkillCatalog, TaskVector, DEFAULT_COMMAND_PERIOD, TASK_DIM};
use rsg_core::composition::{bo_optimize_observed, primitive_generators, BoConfig, BoStep, CompositionParams};
use rsg_core::embedding::TrainedGraph;
use rsg_core::inference::{query, DispatchMode, QueryReport, Thresholds, DEFAULT_SELECT};
use rsg_core::sketch::{sketch_to_task, SketchPoint, DEFAULT_WINDOW};

/// Largest composition budget a client may request.
pub const MAX_BUDGET: usize = 1000;

#[derive(Debug, Clone)]
pub struct Settings {
    pub top_k: usize,
    pub n_select: usize,
    pub thresholds: Thresholds,
    pub bo: BoConfig,
    pub seed: u64,
    pub sketch_window: usize,
    pub command_period: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            top_k: 10,
            n_select: DEFAULT_SELECT,
            thresholds: Thresholds::default(),
            bo: BoConfig::default(),
            seed: 0,
            sketch_window: DEFAULT_WINDOW,
            command_period: DEFAULT_COMMAND_PERIOD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Pending,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionJob {
    pub id: u64,
    pub status: JobStatus,
    pub mode: DispatchMode,
    pub selected: Vec<String>,
    pub trace: Vec<BoStep>,
    pub result: Option<CompositionParams<f64>>,
    pub error: Option<String>,
}

pub struct AppState {
    graph: TrainedGraph<f64>,
    catalog: SkillCatalog,
    settings: Settings,
    skills_body: String,
    skills_etag: String,
    jobs: Mutex<Vec<Arc<Mutex<CompositionJob>>>>,
}

impl AppState {
    /// The catalog supplies generators for composition; the model must
    /// list the same skills.
    pub fn new(graph: TrainedGraph<f64>, catalog: SkillCatalog, settings: Settings) -> Result<Self, String> {
        if graph.skills.iter().any(|s| catalog.skill(&s.id).is_none()) {
            return Err("model lists skills missing from the catalog".into());
        }
        settings.thresholds.validate().map_err(|e| e.to_string())?;
        let skills_body = serde_json::to_string(&graph.skills).map_err(|e| e.to_string())?;
        let mut h = DefaultHasher::new();
        skills_body.hash(&mut h);
        let skills_etag = format!("\"{:016x}\"", h.finish());
        Ok(Self {
            graph,
            catalog,
            settings,
            skills_body,
            skills_etag,
            jobs: Mutex::new(Vec::new()),
        })
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    fn job(&self, id: u64) -> Option<Arc<Mutex<CompositionJob>>> {
        let jobs = self.jobs.lock().expect("job list lock");
        usize::try_from(id).ok().and_then(|i| jobs.get(i).cloned())
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/query", post(post_query))
        .route("/api/compose", post(post_compose))
        .route("/api/compose/{id}", get(get_compose))
        .route("/api/skills", get(get_skills))
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    info!(addr = ?listener.local_addr().ok(), "serving");
    axum::serve(listener, router(state)).await
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn unprocessable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct EnvParams {
    pub friction: f64,
    pub flatness: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, Deserialize)]
struct QueryBody {
    env: EnvParams,
    task: Option<Vec<f64>>,
    sketch: Option<Vec<SketchPoint>>,
}

#[derive(Debug, Clone, Deserialize)]
struct ComposeBody {
    #[serde(flatten)]
    query: QueryBody,
    budget: Option<usize>,
    seed: Option<u64>,
}

fn parse<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

fn resolve(state: &AppState, body: &QueryBody) -> Result<(EnvInstance, TaskVector), ApiError> {
    let e = body.env;
    if ![e.friction, e.flatness, e.slope].iter().all(|v| v.is_finite()) {
        return Err(ApiError::unprocessable("environment parameters must be finite"));
    }
    let env = EnvInstance::new("query", e.friction, e.flatness, e.slope);
    let task = match (&body.task, &body.sketch) {
        (Some(flat), None) => {
            if flat.len() != TASK_DIM {
                return Err(ApiError::unprocessable(format!(
                    "task must have {TASK_DIM} values, got {}",
                    flat.len()
                )));
            }
            TaskVector::from_flat(flat).map_err(|e| ApiError::unprocessable(e.to_string()))?
        }
        (None, Some(points)) => sketch_to_task(points, state.settings.sketch_window, state.catalog.v_max)
            .map_err(|e| ApiError::unprocessable(e.to_string()))?,
        _ => return Err(ApiError::bad_request("give exactly one of task or sketch")),
    };
    Ok((env, task))
}

fn run_query(state: &AppState, env: &EnvInstance, task: &TaskVector) -> Result<QueryReport, ApiError> {
    let s = &state.settings;
    query(&state.graph, env, task, s.top_k, s.n_select, &s.thresholds)
        .map_err(|e| ApiError::unprocessable(e.to_string()))
}

async fn post_query(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<QueryReport>, ApiError> {
    let body: QueryBody = parse(&body)?;
    let (env, task) = resolve(&state, &body)?;
    Ok(Json(run_query(&state, &env, &task)?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobCreated {
    pub job_id: u64,
}

async fn post_compose(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> Result<(StatusCode, Json<JobCreated>), ApiError> {
    let body: ComposeBody = parse(&body)?;
    let (env, task) = resolve(&state, &body.query)?;
    let report = run_query(&state, &env, &task)?;
    let decision = report.decision;
    if decision.mode == DispatchMode::Execute {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("top score {:.4} deploys {} directly", decision.top_score, decision.selected[0]),
        ));
    }
    let mut cfg = state.settings.bo.clone();
    if let Some(b) = body.budget {
        if b == 0 || b > MAX_BUDGET {
            return Err(ApiError::unprocessable(format!("budget must be in 1..={MAX_BUDGET}")));
        }
        cfg.budget = b;
    }
    let generators =
        primitive_generators(&state.catalog, &decision.selected).map_err(|e| ApiError::unprocessable(e.to_string()))?;
    let cmd = task.command(state.catalog.v_max, state.settings.command_period);
    let seed = body.seed.unwrap_or(state.settings.seed);

    let job = {
        let mut jobs = state.jobs.lock().expect("job list lock");
        let job = Arc::new(Mutex::new(CompositionJob {
            id: jobs.len() as u64,
            status: JobStatus::Pending,
            mode: decision.mode,
            selected: decision.selected.clone(),
            trace: Vec::new(),
            result: None,
            error: None,
        }));
        jobs.push(job.clone());
        job
    };
    let id = job.lock().expect("job lock").id;
    let scores = decision.scores;
    std::thread::spawn(move || {
        job.lock().expect("job lock").status = JobStatus::Running;
        let outcome = bo_optimize_observed(&generators, &scores, &cmd, &env, &cfg, seed, |step| {
            job.lock().expect("job lock").trace.push(step.clone());
        });
        let mut j = job.lock().expect("job lock");
        match outcome {
            Ok((best, _)) => {
                j.result = Some(best);
                j.status = JobStatus::Done;
            }
            Err(e) => {
                warn!(id, error = %e, "composition job failed");
                j.error = Some(e.to_string());
                j.status = JobStatus::Failed;
            }
        }
    });
    Ok((StatusCode::ACCEPTED, Json(JobCreated { job_id: id })))
}

async fn get_compose(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<CompositionJob>, ApiError> {
    let job = id
        .parse::<u64>()
        .ok()
        .and_then(|id| state.job(id))
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no job {id}")))?;
    let snapshot = job.lock().expect("job lock").clone();
    Ok(Json(snapshot))
}

async fn get_skills(State(state): State<Arc<AppState>>, headers: HeaderMap) -> Response {
    let etag = state.skills_etag.as_str();
    let matches = headers
        .get(header::IF_NONE_MATCH)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.split(',').any(|t| t.trim() == etag || t.trim() == "*"));
    if matches {
        return (StatusCode::NOT_MODIFIED, [(header::ETAG, etag.to_string())]).into_response();
    }
    (
        StatusCode::OK,
        [
            (header::ETAG, etag.to_string()),
            (header::CONTENT_TYPE, "application/json".to_string()),
        ],
        state.skills_body.clone(),
    )
        .into_response()
}

