//! Local HTTP JSON API over a stage directory whose mapper stage has run.
//! Graph versions are append-only: version 1 is the mapper output and each
//! finished job adds one. Jobs run one at a time on a single worker.

use crate::config::{PipelineConfig, Scorer};
use crate::pipeline::{
    build_scorer, completion_report, downsample, filter_generated, generate, parse_scaffolds, perform_surgery,
    shared_scaffolds, Frame, Pipeline, PipelineError, ScorerReport, Snapshot, Stage,
};
use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use lacuna_core::chem::{murcko_scaffold, parse_smiles};
use lacuna_core::completion::{placeholder_scaffolds, rebuild_with_candidates};
use lacuna_core::dataset::Record;
use lacuna_core::generator::train_policy;
use lacuna_core::mapper::detect_features;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use tokio::sync::mpsc;
use tower_http::services::ServeDir;

pub const API_VERSION: u32 = 1;

pub struct Session {
    pub cfg: PipelineConfig,
    pub frame: Frame,
    /// `versions[k]` is version `k + 1`.
    pub versions: Vec<Snapshot>,
}

impl Session {
    pub fn load(pipeline: &Pipeline) -> Result<Self, PipelineError> {
        for stage in [Stage::Ingest, Stage::Anomaly, Stage::Mapper] {
            if !pipeline.has_output(stage)? {
                return Err(PipelineError::MissingUpstream {
                    stage: "serve",
                    missing: stage.name(),
                });
            }
        }
        let frame = pipeline.load_frame()?;
        let snap = pipeline.load_snapshot(&frame)?;
        Ok(Session {
            cfg: pipeline.cfg.clone(),
            frame,
            versions: vec![snap],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum IntervalChoice {
    Named(String),
    Bounds { lo: f64, hi: f64 },
}

fn default_interval() -> IntervalChoice {
    IntervalChoice::Named("auto".into())
}

fn default_placeholders() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum JobRequest {
    LacunaSurgery {
        version: usize,
        edges: Vec<[usize; 2]>,
    },
    GenerateAndComplete {
        version: usize,
        edges: Vec<[usize; 2]>,
        /// Reference scaffold SMILES; absent uses the shared Murcko scaffolds.
        #[serde(default)]
        scaffolds: Option<Vec<String>>,
        /// Maximum placeholders per scaffold.
        #[serde(default = "default_placeholders")]
        placeholders: usize,
        scoring: Scorer,
        #[serde(default = "default_interval")]
        interval: IntervalChoice,
    },
}

impl JobRequest {
    fn kind(&self) -> &'static str {
        match self {
            JobRequest::LacunaSurgery { .. } => "lacuna-surgery",
            JobRequest::GenerateAndComplete { .. } => "generate-and-complete",
        }
    }

    fn version(&self) -> usize {
        match self {
            JobRequest::LacunaSurgery { version, .. } | JobRequest::GenerateAndComplete { version, .. } => *version,
        }
    }

    fn edges(&self) -> &[[usize; 2]] {
        match self {
            JobRequest::LacunaSurgery { edges, .. } | JobRequest::GenerateAndComplete { edges, .. } => edges,
        }
    }

    /// Checks everything that does not need the computation itself.
    fn validate(&self, session: &Session) -> Result<(), String> {
        let v = self.version();
        let snap = v
            .checked_sub(1)
            .and_then(|i| session.versions.get(i))
            .ok_or_else(|| format!("version {v} does not exist"))?;
        if self.edges().is_empty() {
            return Err("edges: list at least one edge".into());
        }
        for &[a, b] in self.edges() {
            if !snap.graph.has_edge(a, b) || a == b || a.max(b) >= snap.graph.nodes.len() {
                return Err(format!("edges: ({a}, {b}) is not an edge of version {v}"));
            }
        }
        if let JobRequest::GenerateAndComplete {
            scaffolds,
            placeholders,
            interval,
            ..
        } = self
        {
            if *placeholders == 0 {
                return Err("placeholders: must be >= 1".into());
            }
            for s in scaffolds.iter().flatten() {
                parse_smiles(s).map_err(|e| format!("scaffolds: `{s}`: {e}"))?;
            }
            match interval {
                IntervalChoice::Named(n) if n != "auto" => return Err(format!("interval: unknown choice `{n}`")),
                IntervalChoice::Bounds { lo, hi } if lo.is_nan() || hi.is_nan() || lo >= hi => {
                    return Err("interval: lo must be below hi".into())
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Job {
    pub id: u64,
    pub kind: &'static str,
    pub status: JobStatus,
    pub request: JobRequest,
    /// Service clock ticks at start and finish; one worker means the
    /// intervals of different jobs never overlap.
    pub started: Option<u64>,
    pub finished: Option<u64>,
    /// Graph version the job produced.
    pub version: Option<usize>,
    pub error: Option<String>,
}

#[derive(Clone)]
pub struct AppState {
    pub session: Arc<RwLock<Session>>,
    pub jobs: Arc<RwLock<BTreeMap<u64, Job>>>,
    pub reports: Arc<RwLock<BTreeMap<u64, Value>>>,
    next_job: Arc<AtomicU64>,
    clock: Arc<AtomicU64>,
    queue: mpsc::UnboundedSender<u64>,
}

impl AppState {
    /// Spawns the worker; needs a running tokio runtime.
    pub fn start(session: Session) -> Self {
        let (queue, mut rx) = mpsc::unbounded_channel::<u64>();
        let state = AppState {
            session: Arc::new(RwLock::new(session)),
            jobs: Arc::new(RwLock::new(BTreeMap::new())),
            reports: Arc::new(RwLock::new(BTreeMap::new())),
            next_job: Arc::new(AtomicU64::new(1)),
            clock: Arc::new(AtomicU64::new(1)),
            queue,
        };
        let worker = state.clone();
        tokio::spawn(async move {
            while let Some(id) = rx.recv().await {
                let w = worker.clone();
                let _ = tokio::task::spawn_blocking(move || w.execute(id)).await;
            }
        });
        state
    }

    fn tick(&self) -> u64 {
        self.clock.fetch_add(1, Ordering::SeqCst)
    }

    fn execute(&self, id: u64) {
        let request = {
            let mut jobs = self.jobs.write().expect("job registry");
            let job = jobs.get_mut(&id).expect("queued job is registered");
            job.status = JobStatus::Running;
            job.started = Some(self.tick());
            job.request.clone()
        };
        let outcome = self.run_job(id, &request);
        let mut jobs = self.jobs.write().expect("job registry");
        let job = jobs.get_mut(&id).expect("running job is registered");
        match outcome {
            Ok(version) => {
                job.status = JobStatus::Done;
                job.version = Some(version);
            }
            Err(e) => {
                job.status = JobStatus::Failed;
                job.error = Some(e.to_string());
            }
        }
        job.finished = Some(self.tick());
    }

    /// Returns the new version number.
    fn run_job(&self, id: u64, request: &JobRequest) -> Result<usize, PipelineError> {
        let (cfg, frame, snap) = {
            let s = self.session.read().expect("session");
            (
                s.cfg.clone(),
                s.frame.clone(),
                s.versions[request.version() - 1].clone(),
            )
        };
        let next = match request {
            JobRequest::LacunaSurgery { edges, .. } => {
                let surgery = perform_surgery(&frame, &snap, edges, None)?;
                let reduced = surgery.reduced(&snap);
                let graph = rebuild_with_candidates(
                    &reduced.fingerprints(),
                    &[],
                    &frame.forest,
                    &frame.cover,
                    &frame.clusterer,
                )?;
                Snapshot::from_parts(reduced, graph, &frame.forest)?
            }
            JobRequest::GenerateAndComplete {
                edges,
                scaffolds,
                placeholders,
                scoring,
                interval,
                ..
            } => {
                let bounds = match interval {
                    IntervalChoice::Bounds { lo, hi } => Some([*lo, *hi]),
                    IntervalChoice::Named(_) => None,
                };
                let surgery = perform_surgery(&frame, &snap, edges, bounds)?;
                let refs = match scaffolds {
                    Some(list) => parse_scaffolds(list)?,
                    None => shared_scaffolds(&snap, &surgery),
                };
                if refs.is_empty() {
                    return Err(PipelineError::NoScaffolds);
                }
                let marked =
                    placeholder_scaffolds(&refs, *placeholders, cfg.generator.placeholder_reps, cfg.seeds.train);
                let ref_smiles: Vec<String> = refs.into_iter().map(|s| s.smiles).collect();
                let mut reduced = surgery.reduced(&snap);
                let corpus: Vec<String> = reduced.records.iter().map(|r| r.smiles.clone()).collect();
                let policy = train_policy(&corpus, cfg.generator.order)?;
                let params = reduced.params;
                let scorer = build_scorer(*scoring, &ref_smiles, &surgery, &frame, params, cfg.generator.tau)?;
                let generated = generate(&cfg, &policy, &marked, &scorer)?;
                let filtered = filter_generated(&generated.candidates, &frame, &surgery, params)?;
                let reduced_fps = reduced.fingerprints();
                let rows = surgery.context(&frame, &snap, &reduced_fps).evaluate_variants(
                    &filtered.fingerprints,
                    &cfg.complete.downsample,
                    cfg.neighbor_range(),
                )?;
                let keep: Vec<usize> = match cfg.complete.downsample.first() {
                    Some(rule) => downsample(&filtered.fingerprints, rule, cfg.neighbor_range()),
                    None => (0..filtered.smiles.len()).collect(),
                };
                let report = ScorerReport {
                    scorer: scoring.name().to_string(),
                    sampled: generated.candidates.len(),
                    filtered: filtered.smiles.len(),
                    elite_means: generated.elite_means,
                    report: completion_report(&surgery, rows),
                };
                let added: Vec<Record> = keep
                    .iter()
                    .enumerate()
                    .map(|(n, &i)| Record {
                        id: format!("job{id}-{n:05}"),
                        smiles: filtered.smiles[i].clone(),
                        year: None,
                        fingerprint: filtered.fingerprints[i].clone(),
                    })
                    .collect();
                let added_fps: Vec<_> = added.iter().map(|r| r.fingerprint.clone()).collect();
                let graph =
                    rebuild_with_candidates(&reduced_fps, &added_fps, &frame.forest, &frame.cover, &frame.clusterer)?;
                reduced.extend(added)?;
                self.reports.write().expect("reports").insert(
                    id,
                    json!({
                        "api_version": API_VERSION,
                        "job": id,
                        "surgery": surgery,
                        "scaffolds": ref_smiles,
                        "placeholders": marked,
                        "completion": report,
                        "table": report.report.to_table(),
                    }),
                );
                Snapshot::from_parts(reduced, graph, &frame.forest)?
            }
        };
        let mut s = self.session.write().expect("session");
        s.versions.push(next);
        Ok(s.versions.len())
    }
}

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({"api_version": API_VERSION, "error": self.1}))).into_response()
    }
}

fn not_found(what: String) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, what)
}

#[derive(Debug, Deserialize)]
pub struct VersionQuery {
    version: Option<usize>,
}

fn pick_version(session: &Session, q: &VersionQuery) -> Result<(usize, Snapshot), ApiError> {
    let v = q.version.unwrap_or(session.versions.len());
    v.checked_sub(1)
        .and_then(|i| session.versions.get(i))
        .map(|s| (v, s.clone()))
        .ok_or_else(|| not_found(format!("version {v} does not exist")))
}

async fn graph(State(st): State<AppState>, Query(q): Query<VersionQuery>) -> Result<Json<Value>, ApiError> {
    let (v, snap, count) = {
        let s = st.session.read().expect("session");
        let (v, snap) = pick_version(&s, &q)?;
        (v, snap, s.versions.len())
    };
    let nodes: Vec<Value> = snap
        .graph
        .nodes
        .iter()
        .map(|n| json!({"id": n.id, "interval": n.interval_index, "size": n.members.len(), "mean_lens": n.mean_lens}))
        .collect();
    Ok(Json(json!({
        "api_version": API_VERSION,
        "version": v,
        "versions": count,
        "nodes": nodes,
        "edges": snap.graph.edges,
        "features": detect_features(&snap.graph, 2),
    })))
}

async fn node(
    State(st): State<AppState>,
    Path(id): Path<usize>,
    Query(q): Query<VersionQuery>,
) -> Result<Json<Value>, ApiError> {
    let (v, snap) = pick_version(&st.session.read().expect("session"), &q)?;
    let n = snap
        .graph
        .nodes
        .get(id)
        .ok_or_else(|| not_found(format!("node {id} does not exist in version {v}")))?;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let members: Vec<Value> = n
        .members
        .iter()
        .map(|&m| {
            let r = &snap.dataset.records[m];
            if let Some(s) = parse_smiles(&r.smiles).ok().and_then(|mol| murcko_scaffold(&mol).ok()) {
                *counts.entry(s.smiles).or_default() += 1;
            }
            json!({"id": r.id, "smiles": r.smiles, "lens": snap.lens[m]})
        })
        .collect();
    let mut scaffolds: Vec<(String, usize)> = counts.into_iter().collect();
    scaffolds.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let scaffolds: Vec<Value> = scaffolds
        .into_iter()
        .map(|(s, c)| json!({"smiles": s, "count": c}))
        .collect();
    Ok(Json(json!({
        "api_version": API_VERSION,
        "version": v,
        "id": n.id,
        "interval": n.interval_index,
        "mean_lens": n.mean_lens,
        "members": members,
        "scaffolds": scaffolds,
    })))
}

async fn submit(State(st): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<Value>), ApiError> {
    let request: JobRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError(StatusCode::BAD_REQUEST, format!("malformed job: {e}")))?;
    request
        .validate(&st.session.read().expect("session"))
        .map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, e))?;
    let id = st.next_job.fetch_add(1, Ordering::SeqCst);
    st.jobs.write().expect("job registry").insert(
        id,
        Job {
            id,
            kind: request.kind(),
            status: JobStatus::Queued,
            request,
            started: None,
            finished: None,
            version: None,
            error: None,
        },
    );
    st.queue
        .send(id)
        .map_err(|_| ApiError(StatusCode::SERVICE_UNAVAILABLE, "worker has stopped".into()))?;
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({"api_version": API_VERSION, "job": id, "status": JobStatus::Queued})),
    ))
}

async fn job(State(st): State<AppState>, Path(id): Path<u64>) -> Result<Json<Value>, ApiError> {
    let jobs = st.jobs.read().expect("job registry");
    let job = jobs
        .get(&id)
        .ok_or_else(|| not_found(format!("job {id} does not exist")))?;
    let mut v = serde_json::to_value(job).expect("job serializes");
    v["api_version"] = json!(API_VERSION);
    Ok(Json(v))
}

async fn report(State(st): State<AppState>, Path(id): Path<u64>) -> Result<Json<Value>, ApiError> {
    st.reports
        .read()
        .expect("reports")
        .get(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| not_found(format!("no report for job {id}")))
}

/// API routes, plus static files from `ui` for every other path.
pub fn router(state: AppState, ui: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/graph", get(graph))
        .route("/api/nodes/{id}", get(node))
        .route("/api/jobs", axum::routing::post(submit))
        .route("/api/jobs/{id}", get(job))
        .route("/api/reports/{id}", get(report))
        .with_state(state);
    match ui {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(pipeline: &Pipeline, addr: std::net::SocketAddr, ui: Option<PathBuf>) -> anyhow::Result<()> {
    let session = Session::load(pipeline)?;
    let app = router(AppState::start(session), ui);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app).await?;
    Ok(())
}
