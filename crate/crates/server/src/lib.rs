//! HTTP API under `/api/v1`. Sessions are serialized per id (one writer at
//! a time, concurrent readers); cleaning runs as a background job.

pub mod error;
pub mod session;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use redhunt_core::auclean::build_propagation_graph;
use redhunt_core::decision::{ConflictRule, Decision, Resolution};
use redhunt_core::elicitation::sample_tuples;
use redhunt_core::pipeline::{classify_all, normalize_cleaned, PipelineConfig, PipelineOutcome};
use redhunt_core::profiling::{export_profile_chart, relation_profile};
use serde::Deserialize;
use serde_json::{json, Value as Json_};
use tokio::sync::{Mutex, RwLock};

pub use error::ApiError;
use session::{JobStatus, Phase, Session, SessionHandle, RESULT_DIR};

type ApiResult<T> = Result<T, ApiError>;

pub struct AppState {
    root: PathBuf,
    sessions: Mutex<HashMap<String, SessionHandle>>,
    next_job: std::sync::atomic::AtomicU64,
}

impl AppState {
    pub fn new(data_root: impl Into<PathBuf>) -> Arc<Self> {
        Arc::new(Self {
            root: data_root.into(),
            sessions: Mutex::new(HashMap::new()),
            next_job: std::sync::atomic::AtomicU64::new(1),
        })
    }

    async fn session(&self, id: &str) -> ApiResult<SessionHandle> {
        let mut sessions = self.sessions.lock().await;
        if let Some(s) = sessions.get(id) {
            return Ok(s.clone());
        }
        let s = Session::open(&self.root, id)?.ok_or_else(|| ApiError::NotFound(format!("no session {id}")))?;
        let handle = Arc::new(RwLock::new(s));
        sessions.insert(id.to_string(), handle.clone());
        Ok(handle)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/relations", get(list_relations))
        .route("/sessions/{id}/relations/{r}/profile", get(profile))
        .route("/sessions/{id}/relations/{r}/samples", get(samples))
        .route("/sessions/{id}/relations/{r}/counterexamples", get(counterexamples))
        .route("/sessions/{id}/decisions", get(list_decisions).post(post_decision))
        .route("/sessions/{id}/graph", get(graph))
        .route("/sessions/{id}/clean", post(start_clean))
        .route("/sessions/{id}/jobs/{job}", get(job_status))
        .route("/sessions/{id}/au-report", get(au_report))
        .route("/sessions/{id}/stability", get(stability))
        .route("/sessions/{id}/conflicts", get(conflicts))
        .route("/sessions/{id}/conflicts/resolve", post(resolve_conflict))
        .route("/sessions/{id}/finalize", post(finalize))
        .route("/sessions/{id}/result", get(result));
    Router::new().nest("/api/v1", api).with_state(state)
}

/// Serves the API on `addr` until the process is stopped.
pub async fn serve(addr: SocketAddr, data_root: PathBuf) -> std::io::Result<()> {
    fs::create_dir_all(&data_root)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(AppState::new(data_root))).await
}

#[derive(Deserialize)]
struct CreateSession {
    snapshot_path: PathBuf,
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    Json(body): Json<CreateSession>,
) -> ApiResult<(StatusCode, Json<Json_>)> {
    let root = state.root.clone();
    let s = tokio::task::spawn_blocking(move || Session::create(&root, body.snapshot_path))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    let view = session_view(&s);
    state.sessions.lock().await.insert(s.id.clone(), Arc::new(RwLock::new(s)));
    Ok((StatusCode::CREATED, Json(view)))
}

fn session_view(s: &Session) -> Json_ {
    json!({
        "id": s.id,
        "snapshot_path": s.snapshot_path,
        "phase": s.phase,
        "decisions": s.log().len(),
        "next_seq": s.log().next_seq(),
        "recommended_order": s.elicitation.recommended_order(),
        "jobs": s.jobs,
    })
}

async fn get_session(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Json_>> {
    let handle = state.session(&id).await?;
    let s = handle.read().await;
    Ok(Json(session_view(&s)))
}

async fn list_relations(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Json_>> {
    let handle = state.session(&id).await?;
    let s = handle.read().await;
    let e = &s.elicitation;
    let mut out = Vec::new();
    for name in e.recommended_order() {
        let r = e.snapshot().relation(&name)?;
        let st = e.state(&name)?;
        out.push(json!({
            "name": name,
            "size": r.len(),
            "arity": r.schema().arity(),
            "tags": st.tags,
            "natural_key": st.natural_key,
            "surrogate_keys": e.surrogate_keys(&name)?,
        }));
    }
    Ok(Json(Json_::Array(out)))
}

#[derive(Deserialize)]
struct KeyQuery {
    key: Option<String>,
    limit: Option<usize>,
}

fn split_key(key: &str) -> Vec<String> {
    key.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect()
}

async fn profile(
    State(state): State<Arc<AppState>>,
    UrlPath((id, rel)): UrlPath<(String, String)>,
    Query(q): Query<KeyQuery>,
) -> ApiResult<Json<Json_>> {
    let handle = state.session(&id).await?;
    let s = handle.read().await;
    let e = &s.elicitation;
    let rp = match q.key.as_deref() {
        Some(k) => {
            let key = split_key(k);
            let tags: BTreeMap<String, _> = e.state(&rel)?.tags.clone().into_iter().collect();
            relation_profile(e.snapshot().relation(&rel)?, &tags, Some(&key))
                .map_err(|e| ApiError::Unprocessable(e.to_string()))?
        }
        None => e.profile(&rel)?,
    };
    let chart = export_profile_chart(&rp);
    Ok(Json(json!({ "profile": rp, "chart": chart })))
}

#[derive(Deserialize)]
struct SampleQuery {
    n: Option<usize>,
    seed: Option<u64>,
}

async fn samples(
    State(state): State<Arc<AppState>>,
    UrlPath((id, rel)): UrlPath<(String, String)>,
    Query(q): Query<SampleQuery>,
) -> ApiResult<Json<Json_>> {
    let handle = state.session(&id).await?;
    let s = handle.read().await;
    let r = s.elicitation.snapshot().relation(&rel)?;
    let rows = sample_tuples(r, q.n.unwrap_or(10), q.seed.unwrap_or(0));
    let attributes: Vec<&str> = r.schema().attribute_names().collect();
    Ok(Json(json!({ "attributes": attributes, "rows": rows })))
}

async fn counterexamples(
    State(state): State<Arc<AppState>>,
    UrlPath((id, rel)): UrlPath<(String, String)>,
    Query(q): Query<KeyQuery>,
) -> ApiResult<Json<Json_>> {
    let handle = state.session(&id).await?;
    let s = handle.read().await;
    let key = split_key(q.key.as_deref().ok_or_else(|| ApiError::Unprocessable("missing key parameter".into()))?);
    let report = s.elicitation.validate_key(&rel, &key)?;
    let groups = s.elicitation.counterexamples(&rel, &key, q.limit.unwrap_or(10))?;
    Ok(Json(json!({ "report": report, "groups": groups })))
}

async fn list_decisions(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Json_>> {
    let handle = state.session(&id).await?;
    let s = handle.read().await;
    Ok(Json(json!(s.log().records())))
}

/// One decision-log record; `seq` is optional and, when present, must be
/// the next sequence number.
#[derive(Deserialize)]
struct PostedDecision {
    seq: Option<u64>,
    relation: String,
    #[serde(flatten)]
    decision: Decision,
}

async fn post_decision(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<PostedDecision>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<(StatusCode, Json<Json_>)> {
    let Json(body) = body.map_err(|e| ApiError::Unprocessable(e.body_text()))?;
    let handle = state.session(&id).await?;
    let mut s = handle.write().await;
    let record = s.decide(&body.relation, body.decision, body.seq)?;
    Ok((StatusCode::CREATED, Json(json!(record))))
}

async fn graph(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Json_>> {
    let handle = state.session(&id).await?;
    let s = handle.read().await;
    let g = build_propagation_graph(&s.elicitation)?;
    Ok(Json(json!({ "graph": g, "rounds": g.rounds(), "order": g.order() })))
}

async fn start_clean(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<(StatusCode, Json<Json_>)> {
    let handle = state.session(&id).await?;
    let mut s = handle.write().await;
    s.require_phase(&[Phase::Elicitation, Phase::Cleaning])?;
    if s.jobs.values().any(|j| matches!(j, JobStatus::Running)) {
        return Err(ApiError::conflict("a cleaning job is already running"));
    }
    // Graph problems are reported before leaving elicitation.
    build_propagation_graph(&s.elicitation)?;
    s.advance(Phase::Cleaning)?;
    let job = state.next_job.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
    s.jobs.insert(job, JobStatus::Running);
    let snapshot = s.elicitation.clone();
    let handle = handle.clone();
    tokio::spawn(async move {
        let outcome = tokio::task::spawn_blocking(move || session::run_clean(&snapshot)).await;
        let mut s = handle.write().await;
        let status = match outcome {
            Ok(Ok(artifacts)) => {
                s.clean = Some(Arc::new(artifacts));
                match s.advance(Phase::Normalization) {
                    Ok(()) => JobStatus::Succeeded,
                    Err(e) => JobStatus::Failed { error: e.to_string() },
                }
            }
            Ok(Err(e)) => JobStatus::Failed { error: e.to_string() },
            Err(e) => JobStatus::Failed { error: e.to_string() },
        };
        s.jobs.insert(job, status);
    });
    Ok((StatusCode::ACCEPTED, Json(json!({ "job": job, "status": "running" }))))
}

async fn job_status(
    State(state): State<Arc<AppState>>,
    UrlPath((id, job)): UrlPath<(String, u64)>,
) -> ApiResult<Json<Json_>> {
    let handle = state.session(&id).await?;
    let s = handle.read().await;
    let status = s.jobs.get(&job).ok_or_else(|| ApiError::NotFound(format!("no job {job}")))?;
    let mut body = json!(status);
    body["job"] = json!(job);
    body["phase"] = json!(s.phase);
    Ok(Json(body))
}

const AFTER_CLEANING: &[Phase] = &[Phase::Normalization, Phase::Done];

async fn au_report(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Json_>> {
    let handle = state.session(&id).await?;
    let mut s = handle.write().await;
    s.require_phase(AFTER_CLEANING)?;
    let c = s.clean_artifacts()?;
    let classes: BTreeMap<&str, u64> = c.au.relations.iter().map(|r| (r.relation.as_str(), r.classes)).collect();
    Ok(Json(json!({ "report": c.au, "classes": classes, "verify": c.verify })))
}

async fn stability(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Json_>> {
    let handle = state.session(&id).await?;
    let mut s = handle.write().await;
    s.require_phase(AFTER_CLEANING)?;
    let c = s.clean_artifacts()?;
    let config = PipelineConfig::default();
    let out = classify_all(&s.elicitation, &c.cleaned, &c.au.order, config.threshold)?;
    Ok(Json(json!(out)))
}

fn preview(s: &mut Session) -> ApiResult<PipelineOutcome> {
    let c = s.clean_artifacts()?;
    Ok(normalize_cleaned(
        &s.elicitation,
        c.cleaned.clone(),
        c.au.clone(),
        c.verify.clone(),
        &PipelineConfig::default(),
    )?)
}

async fn conflicts(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Json_>> {
    let handle = state.session(&id).await?;
    let mut s = handle.write().await;
    s.require_phase(AFTER_CLEANING)?;
    let o = preview(&mut s)?;
    Ok(Json(json!({
        "conflicts": o.conflicts.conflicts,
        "unresolved": o.conflicts.unresolved_count(),
        "missing_historization": o.missing_historization,
    })))
}

#[derive(Deserialize)]
struct ResolveBody {
    seq: Option<u64>,
    relation: String,
    key: Vec<Option<String>>,
    attribute: String,
    #[serde(default)]
    value: Option<String>,
    rule: Option<String>,
}

async fn resolve_conflict(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(body): Json<ResolveBody>,
) -> ApiResult<(StatusCode, Json<Json_>)> {
    let resolution = match body.rule.as_deref() {
        Some(r) => Resolution::Rule(ConflictRule::parse(r).ok_or_else(|| ApiError::Unprocessable(format!("unknown rule {r}")))?),
        None => Resolution::Value(body.value),
    };
    let decision = Decision::ResolveConflict {
        key: body.key,
        attribute: body.attribute,
        resolution,
    };
    let handle = state.session(&id).await?;
    let mut s = handle.write().await;
    let record = s.decide(&body.relation, decision, body.seq)?;
    Ok((StatusCode::CREATED, Json(json!(record))))
}

async fn finalize(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Json_>> {
    let handle = state.session(&id).await?;
    let mut s = handle.write().await;
    s.require_phase(&[Phase::Normalization])?;
    let o = preview(&mut s)?;
    if !o.is_complete() {
        return Err(ApiError::Conflict {
            message: "normalization is not complete".into(),
            details: json!({
                "unresolved_conflicts": o.conflicts.unresolved_count(),
                "missing_historization": o.missing_historization,
                "remaining_au_findings": o.verify.len(),
            }),
        });
    }
    o.write(&s.dir.join(RESULT_DIR))?;
    s.advance(Phase::Done)?;
    Ok(Json(json!(o.summary())))
}

fn read_tree(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            read_tree(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root).expect("under root").to_string_lossy().replace('\\', "/");
            out.insert(rel, fs::read_to_string(&path)?);
        }
    }
    Ok(())
}

/// The finalized snapshot and reports as `{ "files": { path: content } }`.
async fn result(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Json_>> {
    let handle = state.session(&id).await?;
    let s = handle.read().await;
    s.require_phase(&[Phase::Done])?;
    let root = s.dir.join(RESULT_DIR);
    let mut files = BTreeMap::new();
    read_tree(&root, &root, &mut files)?;
    Ok(Json(json!({ "files": files })))
}
