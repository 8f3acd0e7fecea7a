//! Drives the review API in process: fetches the queue, submits a few
//! verdicts and prints the QC statistics.
//!
//! Run with `cargo run -p sceneqa-review --example review_session`.

use axum::body::{to_bytes, Body};
use axum::http::Request;
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;

use sceneqa::qa::corpus::{generate_all, Quotas};
use sceneqa::qa::GeneratorConfig;
use sceneqa::synthetic::prepared_pool;
use sceneqa_review::{app_state, router, ServiceConfig, Store, ANNOTATOR_HEADER};

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> Value {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header(ANNOTATOR_HEADER, "ann-1")
        .header("content-type", "application/json");
    let req = req
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = to_bytes(res.into_body(), usize::MAX).await.unwrap();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    println!("{method} {uri} -> {status}");
    value
}

#[tokio::main]
async fn main() {
    let scenes = prepared_pool(7);
    let (items, _) = generate_all(&scenes, &Quotas::uniform(2), &GeneratorConfig::with_seed(7));
    let dir = tempfile::tempdir().unwrap();
    let config = ServiceConfig {
        log_path: dir.path().join("verdicts.jsonl"),
        asset_root: dir.path().join("assets"),
        page_size: 4,
        ..Default::default()
    };
    let store = Store::open(items, scenes, 1, &config.log_path).unwrap();
    let app = router(app_state(store, config));

    let page = call(&app, "GET", "/queue?kind=qa", None).await;
    let ids: Vec<String> = page["targets"]
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(|i| i["item_id"].as_str().map(String::from))
        .collect();
    for (k, id) in ids.iter().enumerate() {
        let ok = k % 3 != 2;
        let verdict = json!({
            "target": {"kind": "qa", "item_id": id},
            "verdict": if ok { "accept" } else { "reject" },
            "criteria": {
                "answer_correct": ok,
                "option_unique": true,
                "plausible": true,
                "objects_visible": true
            },
            "annotator_id": "ann-1",
            "started_at": 0.0,
            "submitted_at": 20.0 + k as f64
        });
        call(&app, "POST", "/verdict", Some(verdict)).await;
    }
    let stats = call(&app, "GET", "/stats", None).await;
    println!("{}", serde_json::to_string_pretty(&stats).unwrap());
}
