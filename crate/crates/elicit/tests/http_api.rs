use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use prefscope_core::formats::{read_judgments, read_weights, subject_matrices};
use prefscope_core::{ev_priorities, StudyFile};
use prefscope_elicit::{router, CreateRequest, SessionStore, StoreConfig};

fn app_with(config: StoreConfig) -> (Router, Arc<SessionStore>) {
    let store = Arc::new(SessionStore::open(config).unwrap());
    (router(store.clone()), store)
}

fn app() -> Router {
    app_with(StoreConfig {
        default_study: Some(StudyFile::signage()),
        ..StoreConfig::default()
    })
    .0
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
    let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, v)
}

fn grade_for(k: usize) -> Value {
    // moderately inconsistent but deterministic answers
    match k % 4 {
        0 => json!({"intensity": 1, "favored": "none"}),
        1 => json!({"intensity": 3, "favored": "left"}),
        2 => json!({"intensity": 5, "favored": "right"}),
        _ => json!({"intensity": 7, "favored": "left"}),
    }
}

async fn answer_all(app: &Router, id: &str) -> Value {
    let mut last = Value::Null;
    for k in 0..36 {
        let (s, v) = call(app, "GET", &format!("/sessions/{id}/next"), None).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(v["pair"]["pair"], k);
        assert_eq!(v["pair"]["answered"], k);
        assert_eq!(v["pair"]["total"], 36);
        let (s, v) = call(
            app,
            "POST",
            &format!("/sessions/{id}/judgments"),
            Some(json!({"pair": k, "grade": grade_for(k)})),
        )
        .await;
        assert_eq!(s, StatusCode::OK, "{v}");
        last = v;
    }
    last
}

#[tokio::test]
async fn full_session_round_trips_through_export() {
    let app = app();
    let (s, v) = call(&app, "POST", "/sessions", Some(json!({"session_id": "r01", "seed": 42}))).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(v["state"], "in_progress");
    assert_eq!(v["total"], 36);
    assert_eq!(v["next"]["pair"], 0);

    let last = answer_all(&app, "r01").await;
    assert_eq!(last["state"], "awaiting_review");
    let cr = last["result"]["consistency"]["cr"].as_f64().unwrap();
    assert!(cr > 0.0);
    assert_eq!(last["result"]["weights"].as_array().unwrap().len(), 9);
    assert_eq!(last["revision_hints"].as_array().unwrap().len(), 3);

    // revise the worst pair and check CR is recomputed on the updated matrix
    let worst = last["revision_hints"][0]["pair"].as_u64().unwrap();
    let (s, v) = call(
        &app,
        "POST",
        "/sessions/r01/review",
        Some(json!({"decision": "revise", "pairs": [worst]})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["state"], "revising");
    assert_eq!(v["next"]["pair"], worst);
    let (_, v) = call(
        &app,
        "POST",
        "/sessions/r01/judgments",
        Some(json!({"pair": worst, "grade": {"intensity": 1, "favored": "none"}})),
    )
    .await;
    assert_eq!(v["state"], "awaiting_review");
    let cr2 = v["result"]["consistency"]["cr"].as_f64().unwrap();
    assert_ne!(cr, cr2);

    let (s, _) = call(&app, "GET", "/export", None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, v) = call(&app, "POST", "/sessions/r01/review", Some(json!({"decision": "accept"}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["state"], "complete");
    let stored: Vec<f64> = serde_json::from_value(v["result"]["weights"].clone()).unwrap();

    let (s, ex) = call(&app, "GET", "/export", None).await;
    assert_eq!(s, StatusCode::OK);
    let study = StudyFile::signage().design().unwrap();
    let rows = read_judgments(ex["judgments"].as_str().unwrap()).unwrap();
    assert_eq!(rows.len(), 36);
    let mats = subject_matrices(&rows, &study).unwrap();
    assert_eq!(mats.len(), 1);
    let (w, c) = ev_priorities(&mats[0].1).unwrap();
    for (a, b) in w.weights().iter().zip(&stored) {
        assert!((a - b).abs() <= 1e-12);
    }
    assert!((c.cr - cr2).abs() <= 1e-12);
    let weights = read_weights(ex["weights"].as_str().unwrap(), &study).unwrap();
    assert_eq!(weights.len(), 1);
    assert_eq!(weights[0].subject_id, "r01");
}

#[tokio::test]
async fn protocol_errors_have_code_message_detail() {
    let app = app();
    call(&app, "POST", "/sessions", Some(json!({"session_id": "e1"}))).await;
    let (s, v) = call(
        &app,
        "POST",
        "/sessions/e1/judgments",
        Some(json!({"pair": 5, "grade": {"intensity": 3, "favored": "left"}})),
    )
    .await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["code"], "out_of_order");
    assert!(v["message"].is_string());
    assert_eq!(v["detail"]["pair"], 5);

    let (s, v) = call(&app, "POST", "/sessions/e1/review", Some(json!({"decision": "accept"}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["code"], "wrong_state");
    assert_eq!(v["detail"]["state"], "in_progress");

    let (s, v) = call(
        &app,
        "POST",
        "/sessions/e1/judgments",
        Some(json!({"pair": 0, "grade": {"intensity": 3, "favored": "none"}})),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "invalid_request");

    let (s, v) = call(&app, "GET", "/sessions/missing/status", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "not_found");

    let (s, v) = call(&app, "POST", "/sessions", Some(json!({"session_id": "e1"}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["code"], "already_exists");

    let (s, v) = call(&app, "POST", "/sessions", Some(json!({"session_id": "bad/id"}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "invalid_session_id");
}

#[tokio::test]
async fn sessions_without_study_are_rejected() {
    let (app, _) = app_with(StoreConfig::default());
    let (s, v) = call(&app, "POST", "/sessions", Some(json!({}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "no_study");
    let study: Value = serde_json::from_str(&StudyFile::signage().to_json()).unwrap();
    let (s, v) = call(&app, "POST", "/sessions", Some(json!({"study": study}))).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(v["session_id"].as_str().unwrap().len(), 36);
}

#[tokio::test]
async fn empty_and_partial_exports() {
    let app = app();
    let (s, v) = call(&app, "GET", "/export", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["judgments"], "subject_id,left,right,intensity,favored\n");
    assert_eq!(v["weights"], "subject_id,profile,weight,cr\n");

    call(&app, "POST", "/sessions", Some(json!({"session_id": "p1"}))).await;
    for k in 0..3 {
        call(&app, "POST", "/sessions/p1/judgments", Some(json!({"pair": k, "grade": grade_for(k)}))).await;
    }
    let (s, v) = call(&app, "GET", "/export", None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["code"], "incomplete_sessions");
    assert_eq!(v["detail"]["sessions"], json!(["p1"]));
    let (s, v) = call(&app, "GET", "/export?partial=true", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(read_judgments(v["judgments"].as_str().unwrap()).unwrap().len(), 3);
    assert_eq!(v["weights"], "subject_id,profile,weight,cr\n");
}

#[tokio::test]
async fn status_reports_transitivity_unless_disabled() {
    let app = app();
    call(&app, "POST", "/sessions", Some(json!({"session_id": "t1"}))).await;
    call(&app, "POST", "/sessions", Some(json!({"session_id": "t2", "transitivity_indicator": false}))).await;
    let (_, a) = call(&app, "GET", "/sessions/t1/status", None).await;
    let (_, b) = call(&app, "GET", "/sessions/t2/status", None).await;
    assert_eq!(a["transitivity_violations"], 0);
    assert!(b["transitivity_violations"].is_null());
}

#[tokio::test]
async fn same_seed_gives_same_order() {
    let app = app();
    call(&app, "POST", "/sessions", Some(json!({"session_id": "a", "seed": 9}))).await;
    call(&app, "POST", "/sessions", Some(json!({"session_id": "b", "seed": 9}))).await;
    let (_, x) = call(&app, "GET", "/sessions/a/next", None).await;
    let (_, y) = call(&app, "GET", "/sessions/b/next", None).await;
    assert_eq!(x["pair"]["left"], y["pair"]["left"]);
    assert_eq!(x["pair"]["right"], y["pair"]["right"]);
}

#[tokio::test]
async fn logs_replay_after_restart() {
    let dir = tempfile::tempdir().unwrap();
    let config = StoreConfig {
        log_dir: Some(dir.path().to_path_buf()),
        default_study: Some(StudyFile::signage()),
        ..StoreConfig::default()
    };
    let (app, store) = app_with(config.clone());
    call(&app, "POST", "/sessions", Some(json!({"session_id": "L1"}))).await;
    answer_all(&app, "L1").await;
    call(&app, "POST", "/sessions/L1/review", Some(json!({"decision": "revise", "pairs": [2, 7]}))).await;
    call(&app, "POST", "/sessions/L1/judgments", Some(json!({"pair": 2, "grade": grade_for(3)}))).await;
    let before = store.snapshot("L1").unwrap();
    drop(app);
    drop(store);

    let text = std::fs::read_to_string(dir.path().join("L1.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 1 + 36 + 1 + 1);
    let (app, store) = app_with(config);
    assert_eq!(store.snapshot("L1").unwrap(), before);
    let (_, v) = call(&app, "GET", "/sessions/L1/next", None).await;
    assert_eq!(v["state"], "revising");
    assert_eq!(v["pair"]["pair"], 7);
}

#[tokio::test]
async fn unknown_routes_use_error_shape() {
    let (s, v) = call(&app(), "GET", "/nope", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "not_found");
    assert!(v.get("detail").is_some());
}

#[test]
fn base_seed_orders_differ_by_session_and_base() {
    let order = |base: Option<u64>, id: &str| {
        let store = SessionStore::new(StoreConfig {
            default_study: Some(StudyFile::signage()),
            base_seed: base,
            ..StoreConfig::default()
        });
        store
            .create(CreateRequest {
                session_id: Some(id.into()),
                ..CreateRequest::default()
            })
            .unwrap();
        store.snapshot(id).unwrap().pairs
    };
    assert_eq!(order(Some(1), "a"), order(Some(1), "a"));
    assert_ne!(order(Some(1), "a"), order(Some(1), "b"));
    assert_ne!(order(Some(1), "a"), order(Some(2), "a"));
    assert_ne!(order(Some(1), "a"), order(None, "a"));
}
