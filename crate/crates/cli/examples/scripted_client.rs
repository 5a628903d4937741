//! Drives one exam through the HTTP session API in-process, on a manual
//! clock, the way a browser client would: poll `next`, answer inside the
//! window when the level is felt, then read the trace and the result.

use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use axum::Router;
use http_body_util::BodyExt;
use percept::service::{router, ManualClock, ServiceOptions, ServiceState};
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> Result<Value, Box<dyn std::error::Error>> {
    let builder = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let request = builder.body(body.map_or_else(Body::empty, |v| Body::from(v.to_string())))?;
    let response = app.clone().oneshot(request).await?;
    let status = response.status();
    let bytes = response.into_body().collect().await?.to_bytes();
    let value: Value = serde_json::from_slice(&bytes)?;
    if !status.is_success() {
        return Err(format!("{method} {uri}: {status} {value}").into());
    }
    Ok(value)
}

#[tokio::main(flavor = "current_thread")]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let felt_from = 0.3;
    let clock = Arc::new(ManualClock::default());
    let app = router(ServiceState::new(clock.clone(), ServiceOptions::default())?);

    let created = call(&app, "POST", "/sessions", Some(json!({ "participant_id": "P07", "site": "F", "seed": 3 }))).await?;
    let id = created["session_id"].as_str().ok_or("no session id")?;
    println!("session {id}");

    loop {
        let next = call(&app, "GET", &format!("/sessions/{id}/next"), None).await?;
        if next["kind"] == "finished" {
            println!("finished: {}", next["status"]);
            break;
        }
        let (onset, level) = (next["onset"].as_f64().unwrap_or(0.0), next["level"].as_f64().unwrap_or(0.0));
        let mut line = format!("onset {onset:>7.3}  level {level:.2}");
        if level >= felt_from {
            clock.set(onset + 0.8);
            let r = call(&app, "POST", &format!("/sessions/{id}/response"), Some(json!({}))).await?;
            line += &format!("  pressed: {}", r["classification"]);
        }
        println!("{line}");
        clock.set(next["deadline"].as_f64().unwrap_or(onset) + 0.01);
    }

    let trace = call(&app, "GET", &format!("/sessions/{id}/trace"), None).await?;
    let result = call(&app, "GET", &format!("/sessions/{id}/result"), None).await?;
    println!("{} reversals, threshold {}", trace["reversal_count"], result["value"]);
    Ok(())
}
