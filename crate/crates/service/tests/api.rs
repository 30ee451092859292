use std::sync::{Arc, OnceLock};
use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use rsg_core::catalog::{materialize, GraphFacts, SkillCatalog, TaskVector};
use rsg_core::embedding::{init_graph, train, TrainConfig, TrainedGraph};
use rsg_core::fixtures::one_to_many_catalog;
use rsg_core::inference::{query, DispatchMode, Thresholds};
use rsg_service::{router, AppState, CompositionJob, JobStatus, Settings};

struct Fixture {
    catalog: SkillCatalog,
    facts: GraphFacts,
    graph: TrainedGraph<f64>,
}

fn fixture() -> &'static Fixture {
    static CELL: OnceLock<Fixture> = OnceLock::new();
    CELL.get_or_init(|| {
        let catalog = one_to_many_catalog();
        let facts = materialize(&catalog, 10, 3).unwrap();
        let cfg = TrainConfig {
            epochs: 150,
            ..Default::default()
        };
        let graph = train::<f64>(&catalog, &facts, &cfg).unwrap().graph;
        Fixture { catalog, facts, graph }
    })
}

fn settings() -> Settings {
    let mut s = Settings::default();
    s.bo.budget = 12;
    s
}

fn app() -> axum::Router {
    let f = fixture();
    router(Arc::new(AppState::new(f.graph.clone(), f.catalog.clone(), settings()).unwrap()))
}

fn env_json() -> Value {
    let e = &fixture().facts.env_instances[0];
    json!({ "friction": e.friction, "flatness": e.flatness, "slope": e.slope })
}

async fn send(app: &axum::Router, req: Request<Body>) -> (StatusCode, Value, axum::http::HeaderMap) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value, headers)
}

fn post(uri: &str, body: String) -> Request<Body> {
    Request::post(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body))
        .unwrap()
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

/// A task profile whose top score falls in the compose band.
fn medium_task() -> TaskVector {
    let f = fixture();
    let env = &f.facts.env_instances[0];
    let a = f.facts.task_instances[0].flat();
    let b = f.facts.task_instances.last().unwrap().flat();
    for k in 0..=100 {
        let t = k as f64 / 100.0;
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (1.0 - t) * x + t * y).collect();
        let task = TaskVector::from_flat(&mix).unwrap();
        let r = query(&f.graph, env, &task, 3, 3, &Thresholds::default()).unwrap();
        if r.decision.mode == DispatchMode::Compose {
            return task;
        }
    }
    panic!("no blend lands in the compose band");
}

#[tokio::test]
async fn query_matches_library_inference() {
    let f = fixture();
    let app = app();
    let task = &f.facts.task_instances[0];
    let body = json!({ "env": env_json(), "task": task.flat() }).to_string();
    let (status, value, _) = send(&app, post("/api/query", body)).await;
    assert_eq!(status, StatusCode::OK, "{value}");
    let expected = query(&f.graph, &f.facts.env_instances[0], task, 10, 3, &Thresholds::default()).unwrap();
    assert_eq!(value, serde_json::to_value(&expected).unwrap());
    assert_eq!(value["ranking"].as_array().unwrap().len(), 3);
    assert!(value["mode"].is_string() && value["selected"].is_array());
}

#[tokio::test]
async fn wrong_task_length_is_unprocessable() {
    let body = json!({ "env": env_json(), "task": vec![0.0; 76] }).to_string();
    let (status, _, _) = send(&app(), post("/api/query", body)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn malformed_bodies_are_bad_requests() {
    let app = app();
    let (status, _, _) = send(&app, post("/api/query", "{not json".into())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _, _) = send(&app, post("/api/query", json!({ "task": [0.0] }).to_string())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let neither = json!({ "env": env_json() }).to_string();
    let (status, _, _) = send(&app, post("/api/query", neither)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn two_point_sketch_yields_a_ranking() {
    let sketch = json!([{ "x": 0.0, "y": 0.0, "t": 0.0 }, { "x": 1.0, "y": 0.0, "t": 2.0 }]);
    let body = json!({ "env": env_json(), "sketch": sketch }).to_string();
    let (status, value, _) = send(&app(), post("/api/query", body)).await;
    assert_eq!(status, StatusCode::OK, "{value}");
    let ranking = value["ranking"].as_array().unwrap();
    assert_eq!(ranking.len(), 3);
    let s: Vec<f64> = ranking.iter().map(|r| r["s"].as_f64().unwrap()).collect();
    assert!(s.windows(2).all(|w| w[0] >= w[1]));
}

#[tokio::test]
async fn one_point_sketch_is_unprocessable() {
    let body = json!({ "env": env_json(), "sketch": [{ "x": 0.0, "y": 0.0, "t": 0.0 }] }).to_string();
    let (status, _, _) = send(&app(), post("/api/query", body)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn concurrent_queries_agree_with_serial() {
    let app = app();
    let task = fixture().facts.task_instances[5].flat();
    let body = json!({ "env": env_json(), "task": task }).to_string();
    let (_, serial, _) = send(&app, post("/api/query", body.clone())).await;
    let handles: Vec<_> = (0..8)
        .map(|_| {
            let app = app.clone();
            let body = body.clone();
            tokio::spawn(async move { send(&app, post("/api/query", body)).await.1 })
        })
        .collect();
    for h in handles {
        assert_eq!(h.await.unwrap(), serial);
    }
}

#[tokio::test]
async fn skills_listing_carries_a_stable_etag() {
    let app = app();
    let (status, value, headers) = send(&app, get("/api/skills")).await;
    assert_eq!(status, StatusCode::OK);
    let list = value.as_array().unwrap();
    assert_eq!(list.len(), 3);
    assert!(list.iter().all(|s| s["id"].is_string() && s["task_name"].is_string() && s["env_class"].is_string()));
    let etag = headers[header::ETAG].to_str().unwrap().to_string();
    let (_, _, again) = send(&app, get("/api/skills")).await;
    assert_eq!(again[header::ETAG], etag.as_str());
    let cached = Request::get("/api/skills")
        .header(header::IF_NONE_MATCH, &etag)
        .body(Body::empty())
        .unwrap();
    let (status, _, _) = send(&app, cached).await;
    assert_eq!(status, StatusCode::NOT_MODIFIED);
}

#[tokio::test]
async fn empty_model_lists_no_skills() {
    let mut catalog = one_to_many_catalog();
    catalog.skills.clear();
    let graph: TrainedGraph<f64> = init_graph(&catalog, &TrainConfig::default());
    let app = router(Arc::new(AppState::new(graph, catalog, Settings::default()).unwrap()));
    let (status, value, _) = send(&app, get("/api/skills")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(value, json!([]));
}

#[tokio::test]
async fn high_score_query_cannot_be_composed() {
    let f = fixture();
    let body = json!({ "env": env_json(), "task": f.facts.task_instances[0].flat() }).to_string();
    let app = app();
    let (_, q, _) = send(&app, post("/api/query", body.clone())).await;
    assert_eq!(q["mode"], "execute", "{q}");
    let (status, _, _) = send(&app, post("/api/compose", body)).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn unknown_job_is_not_found() {
    let app = app();
    assert_eq!(send(&app, get("/api/compose/7")).await.0, StatusCode::NOT_FOUND);
    assert_eq!(send(&app, get("/api/compose/abc")).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn medium_score_job_runs_to_completion() {
    let app = app();
    let body = json!({ "env": env_json(), "task": medium_task().flat(), "budget": 12 }).to_string();
    let (status, created, _) = send(&app, post("/api/compose", body)).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{created}");
    let uri = format!("/api/compose/{}", created["job_id"]);
    let mut seen = 0;
    let job = loop {
        let (status, value, _) = send(&app, get(&uri)).await;
        assert_eq!(status, StatusCode::OK);
        let job: CompositionJob = serde_json::from_value(value).unwrap();
        assert!(job.trace.len() >= seen, "trace shrank");
        seen = job.trace.len();
        if matches!(job.status, JobStatus::Done | JobStatus::Failed) {
            break job;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    };
    assert_eq!(job.status, JobStatus::Done, "{:?}", job.error);
    assert_eq!(job.trace.len(), 12);
    assert!(job.trace.windows(2).all(|w| w[1].incumbent >= w[0].incumbent));
    let params = job.result.unwrap();
    assert!((params.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[tokio::test]
async fn oversized_budget_is_rejected() {
    let body = json!({ "env": env_json(), "task": medium_task().flat(), "budget": 100_000 }).to_string();
    let (status, _, _) = send(&app(), post("/api/compose", body)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}
