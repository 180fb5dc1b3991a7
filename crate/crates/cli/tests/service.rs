use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use lacuna_cli::config::PipelineConfig;
use lacuna_cli::pipeline::{Pipeline, Stage};
use lacuna_cli::service::{router, AppState, Session};
use lacuna_core::mapper::MapperGraph;
use serde_json::{json, Value};
use std::time::Duration;
use tower::ServiceExt;

fn fixture_config() -> PipelineConfig {
    let mut cfg = PipelineConfig::square_fixture(0);
    cfg.generator.rounds = 1;
    cfg.generator.batch = 64;
    cfg.generator.samples = 400;
    cfg
}

struct Fixture {
    _tmp: tempfile::TempDir,
    pipeline: Pipeline,
    app: Router,
}

fn fixture() -> Fixture {
    let tmp = tempfile::tempdir().unwrap();
    let pipeline = Pipeline::new(tmp.path(), fixture_config());
    pipeline.run_to(Stage::Mapper).unwrap();
    let app = router(AppState::start(Session::load(&pipeline).unwrap()), None);
    Fixture {
        _tmp: tmp,
        pipeline,
        app,
    }
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn raw_post(app: &Router, uri: &str, body: &str) -> StatusCode {
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    app.clone().oneshot(req).await.unwrap().status()
}

async fn wait(app: &Router, job: u64) -> Value {
    for _ in 0..1200 {
        let (_, v) = call(app, "GET", &format!("/api/jobs/{job}"), None).await;
        if v["status"] == "done" || v["status"] == "failed" {
            return v;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    panic!("job {job} did not finish");
}

fn mapper_graph(p: &Pipeline) -> MapperGraph {
    serde_json::from_str(&p.read(Stage::Mapper, "graph.json").unwrap()).unwrap()
}

/// The crossing edges of the fixture square.
fn square_edges(p: &Pipeline) -> Value {
    let g = mapper_graph(p);
    let [u1, u2, v1, v2] = lacuna_core::completion::square_lacunae(&g)[0];
    json!([[u1, v2], [u2, v1]])
}

#[tokio::test]
async fn graph_matches_the_mapper_stage() {
    let f = fixture();
    let g = mapper_graph(&f.pipeline);
    let (status, v) = call(&f.app, "GET", "/api/graph", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["api_version"], 1);
    assert_eq!(v["version"], 1);
    assert_eq!(v["nodes"].as_array().unwrap().len(), g.nodes.len());
    assert_eq!(v["edges"].as_array().unwrap().len(), g.edges.len());
    assert_eq!(v["nodes"][0]["size"], g.nodes[0].members.len());
    assert_eq!(v["features"]["loops"], 0);

    let (status, v) = call(&f.app, "GET", "/api/graph?version=9", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(v["error"].as_str().unwrap().contains("version 9"));
}

#[tokio::test]
async fn node_lists_members_and_scaffolds() {
    let f = fixture();
    let g = mapper_graph(&f.pipeline);
    let (status, v) = call(&f.app, "GET", "/api/nodes/0", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["members"].as_array().unwrap().len(), g.nodes[0].members.len());
    let counts: Vec<u64> = v["scaffolds"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["count"].as_u64().unwrap())
        .collect();
    assert!(counts.windows(2).all(|w| w[0] >= w[1]));
    assert_eq!(counts.iter().sum::<u64>() as usize, g.nodes[0].members.len());
    let (status, _) = call(&f.app, "GET", &format!("/api/nodes/{}", g.nodes.len()), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn invalid_jobs_are_rejected() {
    let f = fixture();
    assert_eq!(
        raw_post(&f.app, "/api/jobs", "{not json").await,
        StatusCode::BAD_REQUEST
    );
    assert_eq!(
        raw_post(&f.app, "/api/jobs", r#"{"kind":"paint","version":1}"#).await,
        StatusCode::BAD_REQUEST
    );
    let cases = [
        json!({"kind": "lacuna-surgery", "version": 4, "edges": [[0, 1]]}),
        json!({"kind": "lacuna-surgery", "version": 1, "edges": []}),
        json!({"kind": "lacuna-surgery", "version": 1, "edges": [[0, 0]]}),
        json!({"kind": "generate-and-complete", "version": 1, "edges": square_edges(&f.pipeline),
               "scoring": "lens", "interval": {"lo": 0.2, "hi": 0.1}}),
        json!({"kind": "generate-and-complete", "version": 1, "edges": square_edges(&f.pipeline),
               "scoring": "lens", "interval": "manual"}),
        json!({"kind": "generate-and-complete", "version": 1, "edges": square_edges(&f.pipeline),
               "scoring": "tanimoto", "scaffolds": ["c1cc"]}),
    ];
    for body in cases {
        let (status, v) = call(&f.app, "POST", "/api/jobs", Some(body.clone())).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
        assert!(v["error"].is_string());
    }
    let (status, _) = call(&f.app, "GET", "/api/jobs/1", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn surgery_job_adds_a_version() {
    let f = fixture();
    let edges = square_edges(&f.pipeline);
    let (status, v) = call(
        &f.app,
        "POST",
        "/api/jobs",
        Some(json!({"kind": "lacuna-surgery", "version": 1, "edges": edges})),
    )
    .await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let job = wait(&f.app, v["job"].as_u64().unwrap()).await;
    assert_eq!(job["status"], "done", "{job}");
    assert_eq!(job["version"], 2);

    let (_, before) = call(&f.app, "GET", "/api/graph?version=1", None).await;
    let (_, after) = call(&f.app, "GET", "/api/graph", None).await;
    assert_eq!(after["version"], 2);
    let size = |g: &Value| -> u64 {
        g["nodes"]
            .as_array()
            .unwrap()
            .iter()
            .map(|n| n["size"].as_u64().unwrap())
            .sum()
    };
    assert!(size(&after) < size(&before));
}

#[tokio::test]
async fn jobs_run_one_at_a_time() {
    let f = fixture();
    let edges = square_edges(&f.pipeline);
    let mut ids = Vec::new();
    for _ in 0..3 {
        let (_, v) = call(
            &f.app,
            "POST",
            "/api/jobs",
            Some(json!({"kind": "lacuna-surgery", "version": 1, "edges": edges})),
        )
        .await;
        ids.push(v["job"].as_u64().unwrap());
    }
    let mut spans = Vec::new();
    for id in ids {
        let job = wait(&f.app, id).await;
        assert_eq!(job["status"], "done");
        spans.push((job["started"].as_u64().unwrap(), job["finished"].as_u64().unwrap()));
    }
    for w in spans.windows(2) {
        assert!(w[0].1 < w[1].0, "{spans:?}");
    }
    let (_, g) = call(&f.app, "GET", "/api/graph", None).await;
    assert_eq!(g["version"], 4);
}

#[tokio::test]
async fn generate_and_complete_restores_the_square() {
    let f = fixture();
    let edges = square_edges(&f.pipeline);
    let body = json!({
        "kind": "generate-and-complete",
        "version": 1,
        "edges": edges,
        "placeholders": 2,
        "scoring": "lens",
        "interval": "auto",
    });
    let (status, v) = call(&f.app, "POST", "/api/jobs", Some(body)).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let id = v["job"].as_u64().unwrap();
    let job = wait(&f.app, id).await;
    assert_eq!(job["status"], "done", "{job}");

    let (status, report) = call(&f.app, "GET", &format!("/api/reports/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    let rows = report["completion"]["report"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows[0]["added"].as_u64().unwrap() > 0);
    assert!(
        !rows[0]["restored"].as_array().unwrap().is_empty(),
        "{}",
        report["table"]
    );
    assert!(report["table"].as_str().unwrap().contains("restored"));

    let (_, g) = call(&f.app, "GET", &format!("/api/graph?version={}", job["version"]), None).await;
    assert_eq!(g["version"], 2);
    let (status, _) = call(&f.app, "GET", "/api/reports/999", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[test]
fn serving_needs_the_mapper_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let p = Pipeline::new(tmp.path(), fixture_config());
    p.run_to(Stage::Anomaly).unwrap();
    assert!(Session::load(&p).is_err());
}
