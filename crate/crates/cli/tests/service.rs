use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use percept::service::{read_event_log, router, ManualClock, ServiceClock, ServiceOptions, ServiceState, TraceResponse};
use percept_core::session::{SessionConfig, TrialIdentity, TrialRecord, TrialSession};
use percept_core::staircase::StaircaseConfig;
use percept_core::BodySite;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app_with(options: ServiceOptions) -> (Router, Arc<ManualClock>) {
    let clock = Arc::new(ManualClock::default());
    let state = ServiceState::new(clock.clone(), options).unwrap();
    (router(state), clock)
}

fn app(strict: bool) -> (Router, Arc<ManualClock>) {
    app_with(ServiceOptions { strict, ..Default::default() })
}

async fn send(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let builder = Request::builder().method(method).uri(uri);
    let request = match body {
        Some(v) => builder.header("content-type", "application/json").body(Body::from(v.to_string())),
        None => builder.body(Body::empty()),
    }
    .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn create(app: &Router, body: Value) -> String {
    let (status, v) = send(app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

/// Scripted client on the manual clock: answers 0.5 s after onset whenever
/// the level reaches `hard_threshold`, then waits out the window.
async fn run_scripted(app: &Router, clock: &ManualClock, id: &str, hard_threshold: Option<f64>) -> Vec<(f64, Option<f64>)> {
    let mut transcript = Vec::new();
    loop {
        let (status, next) = send(app, "GET", &format!("/sessions/{id}/next"), None).await;
        assert_eq!(status, StatusCode::OK, "{next}");
        if next["kind"] == "finished" {
            return transcript;
        }
        let onset = next["onset"].as_f64().unwrap();
        let level = next["level"].as_f64().unwrap();
        let answer = hard_threshold.filter(|t| level >= *t).map(|_| onset + 0.5);
        if let Some(t) = answer {
            clock.set(t);
            let (status, r) = send(app, "POST", &format!("/sessions/{id}/response"), Some(json!({}))).await;
            assert_eq!((status, r["classification"].as_str()), (StatusCode::OK, Some("true_positive")));
        }
        transcript.push((onset, answer));
        clock.set(next["deadline"].as_f64().unwrap() + 0.001);
    }
}

/// The same transcript driven straight through the engine.
fn direct(transcript: &[(f64, Option<f64>)]) -> TrialRecord {
    let identity = TrialIdentity::new("P01", BodySite::H1, 0).unwrap();
    let mut session = TrialSession::new(identity, SessionConfig::default(), StaircaseConfig::default()).unwrap();
    for &(onset, answer) in transcript {
        session.present(onset).unwrap();
        if let Some(t) = answer {
            session.respond(t).unwrap();
        }
        session.close_window().unwrap();
    }
    session.record()
}

async fn trace(app: &Router, id: &str) -> TraceResponse {
    let (status, v) = send(app, "GET", &format!("/sessions/{id}/trace"), None).await;
    assert_eq!(status, StatusCode::OK);
    serde_json::from_value(v).unwrap()
}

#[tokio::test]
async fn scripted_session_matches_the_engine() {
    let (app, clock) = app(false);
    let id = create(&app, json!({ "participant_id": "P01", "site": "H1", "seed": 3 })).await;
    let transcript = run_scripted(&app, &clock, &id, Some(0.23)).await;
    let served = trace(&app, &id).await;
    assert_eq!(served.record, direct(&transcript));
    assert_eq!(served.reversal_count, 8);
    assert_eq!(served.status, percept_core::staircase::StaircaseStatus::Complete);
    let (status, result) = send(&app, "GET", &format!("/sessions/{id}/result"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(result["value"].as_f64(), Some(0.225));
    let replayed = served.record.replay(&StaircaseConfig::default()).unwrap();
    assert_eq!(replayed.compute_threshold().unwrap(), served.record.threshold.unwrap());

    // the inter-stimulus intervals respect the configured range
    for w in transcript.windows(2) {
        let gap = w[1].0 - w[0].0;
        assert!((3.0 - 1e-9..=6.0 + 1e-9).contains(&gap), "{gap}");
    }
    // finished sessions refuse further responses
    let (status, _) = send(&app, "POST", &format!("/sessions/{id}/response"), Some(json!({}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn silent_client_ends_in_nan() {
    let (app, clock) = app(false);
    let id = create(&app, json!({ "participant_id": "P01", "site": "F", "seed": 9 })).await;
    let transcript = run_scripted(&app, &clock, &id, None).await;
    assert_eq!(transcript.len(), 22);
    let served = trace(&app, &id).await;
    let tail: Vec<f64> = served.record.rows.iter().rev().take(3).map(|r| r.level).collect();
    assert_eq!(tail, [1.0; 3]);
    assert_eq!(served.record.rows[served.record.rows.len() - 4].level, 0.95);
    let (status, result) = send(&app, "GET", &format!("/sessions/{id}/result"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!((result["value"].clone(), result["saturated"].clone()), (Value::Null, json!(true)));
}

#[tokio::test]
async fn repeated_polls_return_the_same_stimulus() {
    let (app, clock) = app(false);
    let id = create(&app, json!({ "participant_id": "P01", "site": "H1", "seed": 1 })).await;
    let (_, a) = send(&app, "GET", &format!("/sessions/{id}/next"), None).await;
    clock.set(1.0);
    let (_, b) = send(&app, "GET", &format!("/sessions/{id}/next"), None).await;
    assert_eq!(a["stimulus_index"], b["stimulus_index"]);
    assert_eq!(a["onset"], b["onset"]);
    assert_eq!(b["now"].as_f64(), Some(1.0));
    let onset = a["onset"].as_f64().unwrap();
    assert!((3.0..=6.0).contains(&onset));

    // a late poll never schedules into the past
    clock.set(60.0);
    let (_, c) = send(&app, "GET", &format!("/sessions/{id}/next"), None).await;
    assert_eq!(c["stimulus_index"], json!(1));
    assert!(c["onset"].as_f64().unwrap() >= 63.0);
}

#[tokio::test]
async fn unknown_sessions_are_404() {
    let (app, _) = app(false);
    for (method, path) in [("GET", "next"), ("GET", "trace"), ("GET", "result")] {
        let (status, v) = send(&app, method, &format!("/sessions/nope/{path}"), None).await;
        assert_eq!(status, StatusCode::NOT_FOUND);
        assert_eq!(v["error"], "unknown session");
    }
    let (status, _) = send(&app, "POST", "/sessions/nope/response", Some(json!({}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn malformed_bodies_are_422() {
    let (app, _) = app(false);
    let bad = [
        json!({ "site": "H1" }),
        json!({ "participant_id": "P01", "site": "X9" }),
        json!({ "participant_id": "P01", "site": "H1", "colour": 1 }),
        json!({ "participant_id": "", "site": "H1" }),
        json!({ "participant_id": "P01", "site": "H1", "timing": "client" }),
        json!({ "participant_id": "P01", "site": "H1", "session_config": { "isi_min": 1.0 } }),
        json!({ "participant_id": "P01", "site": "H1", "staircase_config": { "step_size": -0.05 } }),
    ];
    for body in bad {
        let (status, v) = send(&app, "POST", "/sessions", Some(body.clone())).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body} -> {v}");
        assert!(v["error"].is_string());
    }
    let raw = Request::builder()
        .method("POST")
        .uri("/sessions")
        .header("content-type", "application/json")
        .body(Body::from("{not json"))
        .unwrap();
    assert_eq!(app.clone().oneshot(raw).await.unwrap().status(), StatusCode::UNPROCESSABLE_ENTITY);
    let untyped = Request::builder().method("POST").uri("/sessions").body(Body::from("{}")).unwrap();
    assert_eq!(app.clone().oneshot(untyped).await.unwrap().status(), StatusCode::UNPROCESSABLE_ENTITY);

    let id = create(&app, json!({ "participant_id": "P01", "site": "H1" })).await;
    let (status, _) = send(&app, "POST", &format!("/sessions/{id}/response"), Some(json!({ "when": 3 }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = send(&app, "GET", &format!("/sessions/{id}/next?client_timestamp=abc"), None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn strict_mode_rejects_stray_responses() {
    for strict in [false, true] {
        let (app, clock) = app(strict);
        let id = create(&app, json!({ "participant_id": "P01", "site": "H1", "seed": 2 })).await;
        let (_, next) = send(&app, "GET", &format!("/sessions/{id}/next"), None).await;
        clock.set(1.0);
        let (status, v) = send(&app, "POST", &format!("/sessions/{id}/response"), Some(json!({}))).await;
        assert_eq!(v["classification"], "false_positive");
        assert_eq!(status, if strict { StatusCode::CONFLICT } else { StatusCode::OK });

        clock.set(next["onset"].as_f64().unwrap() + 2.6);
        let (status, v) = send(&app, "POST", &format!("/sessions/{id}/response"), Some(json!({}))).await;
        assert_eq!(v["classification"], "ignored_late");
        assert_eq!(status, if strict { StatusCode::CONFLICT } else { StatusCode::OK });

        // either way the stray responses are logged, not fed to the staircase
        let t = trace(&app, &id).await;
        assert_eq!(t.record.false_positive_count, 2);
        assert!(!t.record.rows[0].detected);
        let (status, _) = send(&app, "GET", &format!("/sessions/{id}/result"), None).await;
        assert_eq!(status, StatusCode::CONFLICT);
    }
}

#[tokio::test]
async fn window_edges_follow_the_engine() {
    let (app, clock) = app(false);
    let id = create(&app, json!({ "participant_id": "P01", "site": "H1", "seed": 4 })).await;
    let (_, next) = send(&app, "GET", &format!("/sessions/{id}/next"), None).await;
    let onset = next["onset"].as_f64().unwrap();
    clock.set(onset + 2.4);
    let (_, v) = send(&app, "POST", &format!("/sessions/{id}/response"), Some(json!({}))).await;
    assert_eq!(v["classification"], "true_positive");
    assert_eq!(v["stimulus_index"], json!(0));
    // a second press in the same window collapses into the first
    clock.set(onset + 2.45);
    let (_, v) = send(&app, "POST", &format!("/sessions/{id}/response"), Some(json!({}))).await;
    assert_eq!(v["classification"], "true_positive");
    clock.set(onset + 3.0);
    let t = trace(&app, &id).await;
    assert_eq!(t.record.rows.len(), 1);
    assert_eq!(t.record.rows[0].response_latency, Some(2.4));
    assert_eq!(t.record.false_positive_count, 0);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_sessions_stay_isolated() {
    let (app, _) = app(false);
    let thresholds = [0.13, 0.23, 0.33, 0.43, 0.53, 0.63, 0.73, 0.83];
    let mut handles = Vec::new();
    for (i, &hard) in thresholds.iter().enumerate() {
        let app = app.clone();
        handles.push(tokio::spawn(async move {
            // client-timed, with a client clock that starts at 1000 + i
            let base = 1000.0 + i as f64;
            let id =
                create(&app, json!({ "participant_id": "P01", "site": "H1", "seed": i, "timing": "client", "client_clock": base })).await;
            let mut transcript = Vec::new();
            let mut now = 0.0;
            loop {
                let (_, next) = send(&app, "GET", &format!("/sessions/{id}/next?client_timestamp={}", base + now), None).await;
                if next["kind"] == "finished" {
                    break;
                }
                let onset = next["onset"].as_f64().unwrap();
                let answer = (next["level"].as_f64().unwrap() >= hard).then_some(onset + 0.7);
                if let Some(t) = answer {
                    let body = json!({ "client_timestamp": base + t });
                    let (_, r) = send(&app, "POST", &format!("/sessions/{id}/response"), Some(body)).await;
                    assert_eq!(r["classification"], "true_positive");
                }
                transcript.push((onset, answer));
                now = next["deadline"].as_f64().unwrap() + 0.001;
                tokio::task::yield_now().await;
            }
            (id, transcript)
        }));
    }
    for (handle, hard) in handles.into_iter().zip(thresholds) {
        let (id, transcript) = handle.await.unwrap();
        let served = trace(&app, &id).await;
        assert_eq!(served.record, direct(&transcript));
        // midpoint of the grid levels bracketing the hard threshold
        let expected = (hard / 0.05f64).ceil() * 0.05 - 0.025;
        let value = served.record.threshold.unwrap().value;
        assert!((value - expected).abs() < 1e-9, "{value} vs {expected}");
    }
}

#[tokio::test]
async fn event_log_survives_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let options = ServiceOptions { event_log_dir: Some(dir.path().to_path_buf()), ..Default::default() };

    // uninterrupted reference run
    let (reference_app, reference_clock) = app(false);
    let rid = create(&reference_app, json!({ "participant_id": "P01", "site": "H1", "seed": 21 })).await;
    let reference = run_scripted(&reference_app, &reference_clock, &rid, Some(0.23)).await;

    // same session, stopped after eight stimuli and restored from disk
    let (first, clock) = app_with(options.clone());
    let id = create(&first, json!({ "participant_id": "P01", "site": "H1", "seed": 21 })).await;
    let mut stop_at = 0.0;
    for &(onset, answer) in reference.iter().take(8) {
        let (_, next) = send(&first, "GET", &format!("/sessions/{id}/next"), None).await;
        assert_eq!(next["onset"].as_f64(), Some(onset));
        if let Some(t) = answer {
            clock.set(t);
            send(&first, "POST", &format!("/sessions/{id}/response"), Some(json!({}))).await;
            stop_at = t;
        }
        clock.set(next["deadline"].as_f64().unwrap() + 0.001);
    }
    assert!(stop_at > 0.0);
    drop(first);
    let resumed_clock = Arc::new(ManualClock::default());
    resumed_clock.set(clock.now());
    let state = ServiceState::new(resumed_clock.clone(), options).unwrap();
    assert_eq!(state.session_count(), 1);
    let second = router(state);
    run_scripted(&second, &resumed_clock, &id, Some(0.23)).await;
    let resumed = trace(&second, &id).await;
    let expected = trace(&reference_app, &rid).await;
    assert_eq!(resumed.record, expected.record);

    let (header, events) = read_event_log(&dir.path().join(format!("{id}.jsonl"))).unwrap();
    assert_eq!(header.seed, 21);
    let rebuilt = TrialSession::from_events(header.identity().unwrap(), header.session_config, header.staircase_config, &events).unwrap();
    assert_eq!(rebuilt.record(), resumed.record);
}

#[tokio::test]
async fn static_assets_are_served() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<p>exam</p>").unwrap();
    let (app, _) = app_with(ServiceOptions { static_dir: Some(dir.path().to_path_buf()), ..Default::default() });
    let response = app.clone().oneshot(Request::get("/index.html").body(Body::empty()).unwrap()).await.unwrap();
    assert_eq!(response.status(), StatusCode::OK);
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(&bytes[..], b"<p>exam</p>");
    let (status, _) = send(&app, "GET", "/sessions/nope/trace", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

/// Every `required` key listed in the shipped schema appears in live payloads.
#[tokio::test]
async fn payloads_carry_the_schema_fields() {
    let schema: Value = serde_json::from_str(include_str!("../schema/session_api.schema.json")).unwrap();
    let defs = &schema["$defs"];
    let check = |def: &Value, payload: &Value| {
        for key in def["required"].as_array().unwrap() {
            assert!(payload.get(key.as_str().unwrap()).is_some(), "missing {key} in {payload}");
        }
    };
    let (app, clock) = app(false);
    let (_, created) = send(&app, "POST", "/sessions", Some(json!({ "participant_id": "P01", "site": "W2" }))).await;
    check(&defs["CreateSessionResponse"], &created);
    let id = created["session_id"].as_str().unwrap();
    let (_, next) = send(&app, "GET", &format!("/sessions/{id}/next"), None).await;
    check(&defs["NextResponse"]["oneOf"][0], &next);
    clock.set(next["onset"].as_f64().unwrap() + 0.3);
    let (_, response) = send(&app, "POST", &format!("/sessions/{id}/response"), Some(json!({}))).await;
    check(&defs["ResponseResult"], &response);
    let (_, t) = send(&app, "GET", &format!("/sessions/{id}/trace"), None).await;
    check(&defs["TraceResponse"], &t);
    check(&defs["PendingStimulus"], &t["pending"]);
    run_scripted(&app, &clock, id, Some(0.4)).await;
    let (_, done) = send(&app, "GET", &format!("/sessions/{id}/next"), None).await;
    check(&defs["NextResponse"]["oneOf"][1], &done);
    let (_, t) = send(&app, "GET", &format!("/sessions/{id}/trace"), None).await;
    check(&defs["TrialRow"], &t["rows"][0]);
    let (_, result) = send(&app, "GET", &format!("/sessions/{id}/result"), None).await;
    check(&defs["TrialThreshold"], &result);
}
