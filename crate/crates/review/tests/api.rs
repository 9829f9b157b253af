use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use forge_core::dataset::{apply_visibility_relabel, gen_synthetic_base};
use forge_core::generation::{build_dataset, GenerationConfig, Strategy, TemplateExpert};
use forge_core::review::ReviewStore;
use forge_core::McqaDataset;
use forge_review::router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn dataset() -> McqaDataset {
    let base = apply_visibility_relabel(&gen_synthetic_base(10, 0.188, 5));
    build_dataset(
        &base,
        &GenerationConfig::new(Strategy::Debiased, 5),
        &TemplateExpert::new(5),
    )
    .unwrap()
    .dataset
}

fn app(dir: &std::path::Path, ds: &McqaDataset) -> axum::Router {
    let store =
        ReviewStore::open(dir, BTreeMap::from([("fixture".to_string(), ds.clone())])).unwrap();
    router(Arc::new(store))
}

async fn call(
    app: &axum::Router,
    method: &str,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, Value, String) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(
            body.map(|b| Body::from(b.to_string()))
                .unwrap_or_else(Body::empty),
        )
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let text = String::from_utf8(bytes.to_vec()).unwrap();
    (
        status,
        serde_json::from_str(&text).unwrap_or(Value::Null),
        text,
    )
}

async fn open_session(app: &axum::Router, reviewer: &str) -> String {
    let (status, body, _) = call(
        app,
        "POST",
        "/sessions",
        Some(json!({"reviewer_id": reviewer, "dataset_id": "fixture", "sample_count": 10, "seed": 3})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["total"], 10);
    body["session_id"].as_str().unwrap().to_string()
}

/// Walk a session through `/next`, answering with `pick(sample_id)`.
async fn answer_all(
    app: &axum::Router,
    session: &str,
    pick: impl Fn(&str) -> usize,
) -> Vec<String> {
    let mut seen = Vec::new();
    loop {
        let (status, body, text) =
            call(app, "GET", &format!("/sessions/{session}/next"), None).await;
        assert_eq!(status, StatusCode::OK);
        if body["complete"] == true {
            return seen;
        }
        for leak in ["correct", "source_label", "origin"] {
            assert!(!text.contains(leak), "{leak} leaked in {text}");
        }
        let id = body["item"]["sample_id"].as_str().unwrap().to_string();
        let (status, ack, _) = call(
            app,
            "POST",
            &format!("/sessions/{session}/answers"),
            Some(json!({"sample_id": id, "chosen_index": pick(&id)})),
        )
        .await;
        assert_eq!(status, StatusCode::CREATED, "{ack}");
        seen.push(id);
    }
}

#[tokio::test]
async fn two_reviewer_fixture_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset();
    let app = app(dir.path(), &ds);
    let a = open_session(&app, "A").await;
    let b = open_session(&app, "B").await;

    let mut ids: Vec<String> = ds.iter().map(|i| i.sample_id.clone()).collect();
    ids.sort();
    let (first, second) = (ids[0].clone(), ids[1].clone());
    let right = |id: &str| ds.get(id).unwrap().correct_index;
    let wrong = |id: &str| (right(id) + 1) % 4;
    answer_all(
        &app,
        &a,
        |id| if id == first { wrong(id) } else { right(id) },
    )
    .await;

    // Campaign report excludes B until B finishes.
    let (_, partial, _) = call(&app, "GET", "/campaigns/fixture:3/report", None).await;
    assert_eq!(partial["n_reviewers"], 1);
    assert_eq!(partial["pending_sessions"], json!([b]));

    answer_all(&app, &b, |id| {
        if id == first || id == second {
            wrong(id)
        } else {
            right(id)
        }
    })
    .await;

    // Restart: a fresh router over the same directory sees every answer.
    drop(app);
    let app = self::app(dir.path(), &ds);
    let (status, report, _) = call(&app, "GET", "/campaigns/fixture:3/report", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report["mean_accuracy"], 0.85);
    assert_eq!(report["mean_pairwise_agreement"], 0.9);
    assert_eq!(report["agreement"], json!([[1.0, 0.9], [0.9, 1.0]]));
    assert_eq!(report["reviewers"][0]["accuracy"], 0.9);
    assert_eq!(report["reviewers"][1]["accuracy"], 0.8);
}

#[tokio::test]
async fn error_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset();
    let app = app(dir.path(), &ds);
    let s = open_session(&app, "A").await;
    let (_, next, _) = call(&app, "GET", &format!("/sessions/{s}/next"), None).await;
    let id = next["item"]["sample_id"].clone();
    let uri = format!("/sessions/{s}/answers");

    let (status, _, _) = call(
        &app,
        "POST",
        &uri,
        Some(json!({"sample_id": id, "chosen_index": 0})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    let (status, body, _) = call(
        &app,
        "POST",
        &uri,
        Some(json!({"sample_id": id, "chosen_index": 1})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"]["kind"], "conflict");
    let (status, _, _) = call(
        &app,
        "POST",
        &uri,
        Some(json!({"sample_id": "nope", "chosen_index": 1})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _, _) = call(&app, "GET", "/sessions/session-0099/next", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _, _) = call(&app, "GET", "/campaigns/none/report", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _, _) = call(&app, "GET", "/campaigns/fixture:3/report", None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _, _) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({"reviewer_id": "x", "dataset_id": "fixture", "sample_count": 11, "seed": 3})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _, _) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({"reviewer_id": "x", "dataset_id": "other", "sample_count": 1, "seed": 3})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, ids, _) = call(&app, "GET", "/datasets", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ids, json!(["fixture"]));
}
